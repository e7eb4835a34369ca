#include "jointmodel/conjugate.h"

#include <Eigen/Cholesky>

#include "jointmodel/errors.h"

namespace jointmodel
{

namespace
{

MatrixXd spd_inverse(const MatrixXd& m, const char* what)
{
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
    {
        throw NumericError(std::string(what) + " is not positive definite");
    }
    return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

}  // namespace

NormalConditional mu_x_conditional(
    std::span<const VectorXd> x,
    const MatrixXd& sigma_x,
    const Hyperparameters& hyper)
{
    const Eigen::Index q = sigma_x.rows();
    const MatrixXd sigma_inv = spd_inverse(sigma_x, "sigma_x");
    const MatrixXd prior_prec = spd_inverse(hyper.C, "C");
    VectorXd sum = VectorXd::Zero(q);
    for (const auto& xi : x)
    {
        sum += xi;
    }
    const MatrixXd precision = static_cast<double>(x.size()) * sigma_inv + prior_prec;
    NormalConditional out;
    out.cov = spd_inverse(precision, "posterior precision of mu_x");
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    out.mean = out.cov * (sigma_inv * sum + prior_prec * hyper.c1);
    return out;
}

InverseWishartConditional sigma_x_conditional(
    std::span<const VectorXd> x,
    const VectorXd& mu_x,
    const Hyperparameters& hyper)
{
    InverseWishartConditional out;
    out.df = hyper.v + static_cast<double>(x.size());
    out.scale = hyper.v * hyper.V;
    for (const auto& xi : x)
    {
        const VectorXd d = xi - mu_x;
        out.scale.noalias() += d * d.transpose();
    }
    return out;
}

InverseGamma sigma_eps_conditional(
    double total_rss,
    Eigen::Index total_obs,
    const Hyperparameters& hyper)
{
    return {
        hyper.sigma2_eps_prior.shape + 0.5 * static_cast<double>(total_obs),
        hyper.sigma2_eps_prior.rate + 0.5 * total_rss};
}

InverseGamma sigma_eps_conditional(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    const MeanFunction& mean)
{
    double rss = 0.0;
    Eigen::Index n = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        const auto& ind = data[i];
        const CorrelationFactor factor(state.rho, ind.times, ind.id);
        rss += residual_quad_form(ind, state.alpha, state.x[i], factor, mean);
        n += ind.n_obs();
    }
    return sigma_eps_conditional(rss, n, hyper);
}

VectorXd draw_mu_x(
    std::span<const VectorXd> x,
    const MatrixXd& sigma_x,
    const Hyperparameters& hyper,
    Rng& rng)
{
    const auto cond = mu_x_conditional(x, sigma_x, hyper);
    return sample_mvn(cond.mean, cond.cov, rng);
}

MatrixXd draw_sigma_x(
    std::span<const VectorXd> x,
    const VectorXd& mu_x,
    const Hyperparameters& hyper,
    Rng& rng)
{
    const auto cond = sigma_x_conditional(x, mu_x, hyper);
    return sample_inverse_wishart(cond.df, cond.scale, rng);
}

double draw_sigma_eps(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    Rng& rng,
    const MeanFunction& mean)
{
    const auto cond = sigma_eps_conditional(data, state, hyper, mean);
    return sample_inverse_gamma(cond.shape, cond.rate, rng);
}

}  // namespace jointmodel
