#pragma once

#include <span>

#include "jointmodel/likelihood.h"
#include "jointmodel/random.h"
#include "jointmodel/types.h"

namespace jointmodel
{

struct NormalConditional
{
    VectorXd mean;
    MatrixXd cov;
};

struct InverseWishartConditional
{
    double df = 0.0;
    MatrixXd scale;

    MatrixXd mean() const
    {
        return scale / (df - static_cast<double>(scale.rows()) - 1.0);
    }
};

// mu_x | X, Sigma_X: precision m Sigma_X^-1 + C^-1. With no random effects
// this is the prior.
NormalConditional mu_x_conditional(
    std::span<const VectorXd> x,
    const MatrixXd& sigma_x,
    const Hyperparameters& hyper);

// Sigma_X | X, mu_x ~ IW(v + m, v V + sum (X_i - mu)(X_i - mu)').
InverseWishartConditional sigma_x_conditional(
    std::span<const VectorXd> x,
    const VectorXd& mu_x,
    const Hyperparameters& hyper);

// sigma2_eps | rest ~ IG(v1 + N/2, rate + sum RSS_i / 2) with RSS_i the
// CAR(1)-weighted residual quadratic form at the state's rho.
InverseGamma sigma_eps_conditional(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    const MeanFunction& mean = *default_mean_function());

// Same, with the residual quadratic forms already summed.
InverseGamma sigma_eps_conditional(
    double total_rss,
    Eigen::Index total_obs,
    const Hyperparameters& hyper);

VectorXd draw_mu_x(
    std::span<const VectorXd> x,
    const MatrixXd& sigma_x,
    const Hyperparameters& hyper,
    Rng& rng);

MatrixXd draw_sigma_x(
    std::span<const VectorXd> x,
    const VectorXd& mu_x,
    const Hyperparameters& hyper,
    Rng& rng);

double draw_sigma_eps(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    Rng& rng,
    const MeanFunction& mean = *default_mean_function());

}  // namespace jointmodel
