#pragma once

#include <memory>
#include <span>
#include <vector>

#include "jointmodel/error_covariance.h"
#include "jointmodel/mean_function.h"
#include "jointmodel/types.h"

namespace jointmodel
{

// Structural choices of the joint model that are not parameters.
struct ModelSpec
{
    std::shared_ptr<const MeanFunction> mean = default_mean_function();
    Family family = Family::bernoulli;
    ErrorModel error_model = ErrorModel::car1;
};

// log N(y_i; g(alpha, x_i; t_i), sigma2 * R_i(rho)) where x_i = state.x[index]. Factorizes the error
// covariance once; throws NumericError carrying the individual id.
double longit_loglik(
    const Individual& ind,
    const ParameterState& state,
    std::size_t index,
    const MeanFunction& mean = *default_mean_function());

// Same density with a precomputed correlation factor. Returns -inf when
// alpha is not admissible for the mean function.
double longit_loglik(
    const Individual& ind,
    const VectorXd& alpha,
    const VectorXd& x,
    double sigma2,
    const CorrelationFactor& factor,
    const MeanFunction& mean);

// Generalized residual quadratic form (y - g)' R^{-1} (y - g).
double residual_quad_form(
    const Individual& ind,
    const VectorXd& alpha,
    const VectorXd& x,
    const CorrelationFactor& factor,
    const MeanFunction& mean);

// Linear predictor beta_0' W_i + beta_1' x_i.
double linear_predictor(const Individual& ind, const VectorXd& beta, const VectorXd& x);

// Canonical-link log density of one outcome. Throws DataError for outcomes
// outside the family's support.
double glm_logpdf(Family family, double outcome, double eta, double phi);

// Mean function b'(eta) of the family.
double glm_mean(Family family, double eta);

// Variance function b''(eta) of the family.
double glm_variance(Family family, double eta);

// log f(D_i | x_i) with x_i = state.x[index].
double glm_loglik(
    const Individual& ind,
    const ParameterState& state,
    std::size_t index,
    Family family);

double log_sigmoid(double eta);

// log N(x; mean, cov). Throws NumericError if cov is not positive definite.
double mvn_logpdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov);

double inverse_gamma_logpdf(double x, const InverseGamma& prior);

// log IW(sigma; df, scale), density ∝ |sigma|^{-(df+q+1)/2} exp(-tr(scale sigma^-1)/2).
double inverse_wishart_logpdf(const MatrixXd& sigma, double df, const MatrixXd& scale);

// log f(X_i | mu_x, Sigma_X).
double random_effect_logpdf(const VectorXd& x, const ParameterState& state);

// Sum of the prior block log densities. rho contributes only under car1 and
// phi only when the family has a free dispersion.
double log_prior(const ParameterState& state, const Hyperparameters& hyper, const ModelSpec& spec);

// Unnormalized log posterior: individual terms plus log priors.
double joint_unnorm_logpost(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    const ModelSpec& spec);

// Analytic gradient of joint_unnorm_logpost for the continuous blocks that
// have one (alpha, beta, mu_x, each x_i, sigma2_eps).
struct LogPosteriorGradient
{
    VectorXd alpha;
    VectorXd beta;
    VectorXd mu_x;
    std::vector<VectorXd> x;
    double sigma2_eps = 0.0;
};

LogPosteriorGradient joint_unnorm_logpost_gradient(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    const ModelSpec& spec);

}  // namespace jointmodel
