#include "jointmodel/likelihood.h"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

#include "jointmodel/errors.h"

namespace jointmodel
{

namespace
{

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(1 + exp(eta)) without overflow or loss of precision.
double softplus(double eta)
{
    if (eta > 0.0)
    {
        return eta + std::log1p(std::exp(-eta));
    }
    return std::log1p(std::exp(eta));
}

double log_mvgamma(double a, Eigen::Index q)
{
    double out = 0.25 * static_cast<double>(q * (q - 1)) * std::log(std::numbers::pi);
    for (Eigen::Index j = 0; j < q; ++j)
    {
        out += std::lgamma(a - 0.5 * static_cast<double>(j));
    }
    return out;
}

}  // namespace

double log_sigmoid(double eta)
{
    return -softplus(-eta);
}

double longit_loglik(
    const Individual& ind,
    const VectorXd& alpha,
    const VectorXd& x,
    double sigma2,
    const CorrelationFactor& factor,
    const MeanFunction& mean)
{
    if (!mean.admissible(alpha) || !(sigma2 > 0.0))
    {
        return kNegInf;
    }
    const double n = static_cast<double>(ind.n_obs());
    const double quad = residual_quad_form(ind, alpha, x, factor, mean);
    return -0.5 * (n * (kLog2Pi + std::log(sigma2)) + factor.log_det() + quad / sigma2);
}

double longit_loglik(
    const Individual& ind,
    const ParameterState& state,
    std::size_t index,
    const MeanFunction& mean)
{
    if (!mean.admissible(state.alpha))
    {
        throw InvalidParameter("fixed effects outside the mean function domain");
    }
    if (!(state.sigma2_eps > 0.0))
    {
        throw InvalidParameter("sigma2_eps must be positive");
    }
    const CorrelationFactor factor(state.rho, ind.times, ind.id);
    const double ll
        = longit_loglik(ind, state.alpha, state.x.at(index), state.sigma2_eps, factor, mean);
    if (!std::isfinite(ll))
    {
        throw NumericError("non-finite longitudinal log-likelihood", ind.id);
    }
    return ll;
}

double residual_quad_form(
    const Individual& ind,
    const VectorXd& alpha,
    const VectorXd& x,
    const CorrelationFactor& factor,
    const MeanFunction& mean)
{
    const VectorXd r = ind.y - mean.value(alpha, x, ind.times);
    return factor.quad_form(r);
}

double linear_predictor(const Individual& ind, const VectorXd& beta, const VectorXd& x)
{
    const Eigen::Index k = ind.covariates.size();
    return beta.head(k).dot(ind.covariates) + beta.tail(x.size()).dot(x);
}

double glm_logpdf(Family family, double outcome, double eta, double phi)
{
    switch (family)
    {
        case Family::bernoulli:
            if (outcome == 1.0)
            {
                return -softplus(-eta);
            }
            if (outcome == 0.0)
            {
                return -softplus(eta);
            }
            throw DataError("Bernoulli outcome must be 0 or 1");
        case Family::poisson:
            if (!(outcome >= 0.0) || outcome != std::floor(outcome))
            {
                throw DataError("Poisson outcome must be a non-negative integer");
            }
            return outcome * eta - std::exp(eta) - std::lgamma(outcome + 1.0);
        case Family::gaussian:
        {
            const double r = outcome - eta;
            return -0.5 * (kLog2Pi + std::log(phi) + r * r / phi);
        }
    }
    throw ConfigError("unknown GLM family");
}

double glm_mean(Family family, double eta)
{
    switch (family)
    {
        case Family::bernoulli:
            return std::exp(log_sigmoid(eta));
        case Family::poisson:
            return std::exp(eta);
        case Family::gaussian:
            return eta;
    }
    throw ConfigError("unknown GLM family");
}

double glm_variance(Family family, double eta)
{
    switch (family)
    {
        case Family::bernoulli:
            return std::exp(log_sigmoid(eta) + log_sigmoid(-eta));
        case Family::poisson:
            return std::exp(eta);
        case Family::gaussian:
            return 1.0;
    }
    throw ConfigError("unknown GLM family");
}

double glm_loglik(
    const Individual& ind,
    const ParameterState& state,
    std::size_t index,
    Family family)
{
    const double eta = linear_predictor(ind, state.beta, state.x.at(index));
    return glm_logpdf(family, ind.outcome, eta, state.phi);
}

double mvn_logpdf(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov)
{
    const Eigen::Index d = x.size();
    if (d == 1)
    {
        const double var = cov(0, 0);
        if (!(var > 0.0))
        {
            throw NumericError("normal variance must be positive");
        }
        const double r = x[0] - mean[0];
        return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
    }
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
    {
        throw NumericError("normal covariance is not positive definite");
    }
    const VectorXd z = llt.matrixL().solve(x - mean);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(d) * kLog2Pi + log_det + z.squaredNorm());
}

double inverse_gamma_logpdf(double x, const InverseGamma& prior)
{
    if (!(x > 0.0))
    {
        return kNegInf;
    }
    return prior.shape * std::log(prior.rate) - std::lgamma(prior.shape)
           - (prior.shape + 1.0) * std::log(x) - prior.rate / x;
}

double inverse_wishart_logpdf(const MatrixXd& sigma, double df, const MatrixXd& scale)
{
    const Eigen::Index q = sigma.rows();
    Eigen::LLT<MatrixXd> sigma_llt(sigma);
    if (sigma_llt.info() != Eigen::Success)
    {
        return kNegInf;
    }
    Eigen::LLT<MatrixXd> scale_llt(scale);
    if (scale_llt.info() != Eigen::Success)
    {
        throw NumericError("inverse Wishart scale matrix is not positive definite");
    }
    const double log_det_sigma = 2.0 * sigma_llt.matrixLLT().diagonal().array().log().sum();
    const double log_det_scale = 2.0 * scale_llt.matrixLLT().diagonal().array().log().sum();
    const double trace = (sigma_llt.solve(scale)).trace();
    const double dq = static_cast<double>(q);
    return 0.5 * df * log_det_scale - 0.5 * df * dq * std::numbers::ln2 - log_mvgamma(0.5 * df, q)
           - 0.5 * (df + dq + 1.0) * log_det_sigma - 0.5 * trace;
}

double random_effect_logpdf(const VectorXd& x, const ParameterState& state)
{
    return mvn_logpdf(x, state.mu_x, state.sigma_x);
}

double log_prior(const ParameterState& state, const Hyperparameters& hyper, const ModelSpec& spec)
{
    double lp = mvn_logpdf(state.alpha, hyper.a1, hyper.A);
    lp += inverse_gamma_logpdf(state.sigma2_eps, hyper.sigma2_eps_prior);
    if (spec.error_model == ErrorModel::car1)
    {
        if (!(state.rho >= hyper.rho_lower && state.rho < hyper.rho_upper))
        {
            return kNegInf;
        }
        lp -= std::log(hyper.rho_upper - hyper.rho_lower);
    }
    lp += mvn_logpdf(state.mu_x, hyper.c1, hyper.C);
    lp += inverse_wishart_logpdf(state.sigma_x, hyper.v, hyper.v * hyper.V);
    lp += mvn_logpdf(state.beta, hyper.s, hyper.S);
    if (!has_fixed_dispersion(spec.family))
    {
        lp += inverse_gamma_logpdf(state.phi, hyper.phi_prior);
    }
    return lp;
}

}  // namespace jointmodel

namespace jointmodel
{

double joint_unnorm_logpost(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    const ModelSpec& spec)
{
    if (state.x.size() != data.size())
    {
        throw InvalidParameter("one random effect per individual is required");
    }
    double total = log_prior(state, hyper, spec);
    if (!std::isfinite(total))
    {
        return total;
    }
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        const auto& ind = data[i];
        total += longit_loglik(ind, state, i, *spec.mean);
        total += glm_loglik(ind, state, i, spec.family);
        total += random_effect_logpdf(state.x[i], state);
    }
    return total;
}

LogPosteriorGradient joint_unnorm_logpost_gradient(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    const ModelSpec& spec)
{
    const Eigen::LLT<MatrixXd> sigma_x_llt(state.sigma_x);
    if (sigma_x_llt.info() != Eigen::Success)
    {
        throw NumericError("sigma_x is not positive definite");
    }

    LogPosteriorGradient grad;
    grad.alpha = -hyper.A.llt().solve(state.alpha - hyper.a1);
    grad.beta = -hyper.S.llt().solve(state.beta - hyper.s);
    grad.mu_x = -hyper.C.llt().solve(state.mu_x - hyper.c1);
    const auto& ig = hyper.sigma2_eps_prior;
    const double s2 = state.sigma2_eps;
    grad.sigma2_eps = -(ig.shape + 1.0) / s2 + ig.rate / (s2 * s2);
    grad.x.reserve(data.size());

    for (std::size_t i = 0; i < data.size(); ++i)
    {
        const auto& ind = data[i];
        const VectorXd& xi = state.x[i];
        const CorrelationFactor factor(state.rho, ind.times, ind.id);
        const VectorXd r = ind.y - spec.mean->value(state.alpha, xi, ind.times);
        const VectorXd weighted = factor.solve(r) / s2;

        grad.alpha += spec.mean->jacobian_alpha(state.alpha, xi, ind.times).transpose() * weighted;
        grad.sigma2_eps += -0.5 * static_cast<double>(ind.n_obs()) / s2
                           + 0.5 * factor.quad_form(r) / (s2 * s2);

        const double eta = linear_predictor(ind, state.beta, xi);
        const double score = (ind.outcome - glm_mean(spec.family, eta)) / state.phi;
        const Eigen::Index k = ind.covariates.size();
        grad.beta.head(k) += score * ind.covariates;
        grad.beta.tail(xi.size()) += score * xi;

        const VectorXd centered = sigma_x_llt.solve(xi - state.mu_x);
        grad.mu_x += centered;

        VectorXd gx = spec.mean->jacobian_x(state.alpha, xi, ind.times).transpose() * weighted;
        gx += score * state.beta.tail(xi.size());
        gx -= centered;
        grad.x.push_back(std::move(gx));
    }
    return grad;
}

}  // namespace jointmodel
