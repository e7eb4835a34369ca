#include "jointmodel/gibbs.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "jointmodel/conjugate.h"
#include "jointmodel/metropolis.h"

namespace jointmodel
{

namespace
{

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MatrixXd spd_inverse(const MatrixXd& m)
{
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
    {
        throw NumericError("covariance matrix is not positive definite");
    }
    return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

std::string compose_sampler_message(
    const std::string& block,
    std::int64_t iteration,
    const std::string& what)
{
    std::string out;
    if (iteration >= 0)
    {
        out = "iteration " + std::to_string(iteration) + ", ";
    }
    return out + "block " + block + ": " + what;
}

template <typename F>
void run_block(const char* block, F&& body)
{
    try
    {
        body();
    }
    catch (const SamplerError&)
    {
        throw;
    }
    catch (const Error& e)
    {
        throw SamplerError(block, -1, e.what());
    }
}

double sample_variance(const std::vector<double>& v)
{
    if (v.size() < 2)
    {
        return 0.0;
    }
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
    {
        ss += (x - mean) * (x - mean);
    }
    return ss / static_cast<double>(v.size() - 1);
}

Eigen::Index covariate_dim(std::span<const Individual> data)
{
    if (data.empty())
    {
        return 1;
    }
    const Eigen::Index k = data.front().covariates.size();
    for (const auto& ind : data)
    {
        if (ind.covariates.size() != k)
        {
            throw DataError("all individuals must share the same covariate dimension");
        }
    }
    return k;
}

}  // namespace

SamplerError::SamplerError(const std::string& block, std::int64_t iteration, const std::string& what)
    : Error(compose_sampler_message(block, iteration, what)),
      block_(block),
      detail_(what),
      iteration_(iteration)
{
}

std::int64_t FitConfig::retained() const
{
    if (thin < 1 || iterations <= burn_in)
    {
        return 0;
    }
    return (iterations - burn_in) / thin;
}

void FitConfig::validate() const
{
    if (burn_in < 0)
    {
        throw ConfigError("burn_in must be non-negative");
    }
    if (iterations <= burn_in)
    {
        throw ConfigError("iterations must exceed burn_in");
    }
    if (thin < 1)
    {
        throw ConfigError("thin must be at least 1");
    }
    if (retained() < 1)
    {
        throw ConfigError("thin: schedule retains no draws");
    }
    if (threads < 1)
    {
        throw ConfigError("threads must be at least 1");
    }
    if (proposal_refresh < 1)
    {
        throw ConfigError("proposal_refresh must be at least 1");
    }
}

ModelSpec model_spec(const FitConfig& config, std::shared_ptr<const MeanFunction> mean)
{
    return ModelSpec{std::move(mean), config.family, config.error_model};
}

LogTarget x_conditional(
    const Individual& ind,
    const ParameterState& state,
    const CorrelationFactor& factor,
    const ModelSpec& spec,
    bool include_likelihood)
{
    const Eigen::LLT<MatrixXd> prior_llt(state.sigma_x);
    if (prior_llt.info() != Eigen::Success)
    {
        throw NumericError("Sigma_X is not positive definite");
    }
    const double prior_const = -0.5
        * (static_cast<double>(state.mu_x.size()) * std::log(2.0 * M_PI)
           + 2.0 * prior_llt.matrixLLT().diagonal().array().log().sum());
    const MatrixXd precision = prior_llt.solve(MatrixXd::Identity(state.mu_x.size(), state.mu_x.size()));

    LogTarget target;
    target.value = [&ind, &state, &factor, &spec, include_likelihood, prior_const, precision](const VectorXd& x) {
        const VectorXd d = x - state.mu_x;
        double lp = prior_const - 0.5 * d.dot(precision * d);
        if (include_likelihood)
        {
            lp += longit_loglik(ind, state.alpha, x, state.sigma2_eps, factor, *spec.mean);
            lp += glm_logpdf(spec.family, ind.outcome, linear_predictor(ind, state.beta, x), state.phi);
        }
        return lp;
    };
    if (spec.mean->linear_in_x())
    {
        // The longitudinal curvature is constant in x; only the GLM weight varies.
        MatrixXd curvature = -precision;
        if (include_likelihood)
        {
            const MatrixXd jac = spec.mean->jacobian_x(state.alpha, state.mu_x, ind.times);
            MatrixXd solved(jac.rows(), jac.cols());
            for (Eigen::Index c = 0; c < jac.cols(); ++c)
            {
                solved.col(c) = factor.solve(jac.col(c));
            }
            curvature -= jac.transpose() * solved / state.sigma2_eps;
        }
        target.hessian = [&ind, &state, &spec, include_likelihood, curvature](const VectorXd& x) {
            if (!include_likelihood)
            {
                return curvature;
            }
            const VectorXd b1 = state.beta.tail(x.size());
            const double w = glm_variance(spec.family, linear_predictor(ind, state.beta, x)) / state.phi;
            return MatrixXd(curvature - w * b1 * b1.transpose());
        };
    }
    target.gradient = [&ind, &state, &factor, &spec, include_likelihood, precision](const VectorXd& x) {
        VectorXd grad = -precision * (x - state.mu_x);
        if (include_likelihood)
        {
            const VectorXd r = ind.y - spec.mean->value(state.alpha, x, ind.times);
            grad += spec.mean->jacobian_x(state.alpha, x, ind.times).transpose()
                    * factor.solve(r) / state.sigma2_eps;
            const double eta = linear_predictor(ind, state.beta, x);
            grad += (ind.outcome - glm_mean(spec.family, eta)) / state.phi
                    * state.beta.tail(x.size());
        }
        return grad;
    };
    return target;
}

LogTarget alpha_conditional(
    std::span<const Individual> data,
    const ParameterState& state,
    std::span<const CorrelationFactor> factors,
    const Hyperparameters& hyper,
    const ModelSpec& spec,
    bool include_likelihood)
{
    LogTarget target;
    target.value = [data, &state, factors, &hyper, &spec, include_likelihood](const VectorXd& a) {
        if (!spec.mean->admissible(a))
        {
            return kNegInf;
        }
        double lp = mvn_logpdf(a, hyper.a1, hyper.A);
        if (include_likelihood)
        {
            for (std::size_t i = 0; i < data.size(); ++i)
            {
                lp += longit_loglik(data[i], a, state.x[i], state.sigma2_eps, factors[i], *spec.mean);
            }
        }
        return lp;
    };
    target.gradient = [data, &state, factors, &hyper, &spec, include_likelihood,
                       precision = spd_inverse(hyper.A)](const VectorXd& a) {
        if (!spec.mean->admissible(a))
        {
            return VectorXd(VectorXd::Constant(a.size(), std::numeric_limits<double>::quiet_NaN()));
        }
        VectorXd grad = -precision * (a - hyper.a1);
        if (include_likelihood)
        {
            for (std::size_t i = 0; i < data.size(); ++i)
            {
                const auto& ind = data[i];
                const VectorXd r = ind.y - spec.mean->value(a, state.x[i], ind.times);
                grad += spec.mean->jacobian_alpha(a, state.x[i], ind.times).transpose()
                        * factors[i].solve(r) / state.sigma2_eps;
            }
        }
        return grad;
    };
    return target;
}

LogTarget beta_conditional(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    const ModelSpec& spec,
    bool include_likelihood)
{
    LogTarget target;
    target.value = [data, &state, &hyper, &spec, include_likelihood](const VectorXd& b) {
        double lp = mvn_logpdf(b, hyper.s, hyper.S);
        if (include_likelihood)
        {
            for (std::size_t i = 0; i < data.size(); ++i)
            {
                const double eta = linear_predictor(data[i], b, state.x[i]);
                lp += glm_logpdf(spec.family, data[i].outcome, eta, state.phi);
            }
        }
        return lp;
    };
    target.gradient = [data, &state, &hyper, &spec, include_likelihood,
                       precision = spd_inverse(hyper.S)](const VectorXd& b) {
        VectorXd grad = -precision * (b - hyper.s);
        if (include_likelihood)
        {
            for (std::size_t i = 0; i < data.size(); ++i)
            {
                const auto& ind = data[i];
                const Eigen::Index k = ind.covariates.size();
                const double eta = linear_predictor(ind, b, state.x[i]);
                const double score = (ind.outcome - glm_mean(spec.family, eta)) / state.phi;
                grad.head(k) += score * ind.covariates;
                grad.tail(state.x[i].size()) += score * state.x[i];
            }
        }
        return grad;
    };
    target.hessian = [data, &state, &spec, include_likelihood,
                      precision = spd_inverse(hyper.S)](const VectorXd& b) {
        MatrixXd hess = -precision;
        if (include_likelihood)
        {
            VectorXd z(b.size());
            for (std::size_t i = 0; i < data.size(); ++i)
            {
                const auto& ind = data[i];
                const Eigen::Index k = ind.covariates.size();
                z.head(k) = ind.covariates;
                z.tail(state.x[i].size()) = state.x[i];
                const double w = glm_variance(spec.family, z.dot(b)) / state.phi;
                hess.noalias() -= w * z * z.transpose();
            }
        }
        return hess;
    };
    return target;
}

LogTarget rho_conditional(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    const ModelSpec& spec,
    bool include_likelihood)
{
    LogTarget target;
    target.value = [data, &state, &hyper, &spec, include_likelihood](const VectorXd& r) {
        const double rho = r[0];
        const double upper = std::min(hyper.rho_upper, kRhoCeiling);
        if (!(rho >= hyper.rho_lower && rho <= upper))
        {
            return kNegInf;
        }
        double lp = -std::log(hyper.rho_upper - hyper.rho_lower);
        if (include_likelihood)
        {
            for (std::size_t i = 0; i < data.size(); ++i)
            {
                const auto& ind = data[i];
                const CorrelationFactor factor(rho, ind.times, ind.id);
                lp += longit_loglik(ind, state.alpha, state.x[i], state.sigma2_eps, factor, *spec.mean);
            }
        }
        return lp;
    };
    return target;
}

ParameterState default_initial_state(
    std::span<const Individual> data,
    const FitConfig& config,
    const MeanFunction& mean)
{
    const Eigen::Index p = mean.alpha_dim();
    const Eigen::Index q = mean.x_dim();
    const Eigen::Index k = covariate_dim(data);

    ParameterState state;
    state.alpha = VectorXd::Zero(p);
    std::vector<double> all_times;
    for (const auto& ind : data)
    {
        all_times.insert(all_times.end(), ind.times.data(), ind.times.data() + ind.times.size());
    }
    if (p == 2)
    {
        double median = 1.0;
        double range = 4.0;
        if (!all_times.empty())
        {
            std::sort(all_times.begin(), all_times.end());
            const std::size_t n = all_times.size();
            median = n % 2 == 1 ? all_times[n / 2] : 0.5 * (all_times[n / 2 - 1] + all_times[n / 2]);
            range = all_times.back() - all_times.front();
            if (!(range > 0.0))
            {
                range = 4.0;
            }
        }
        state.alpha << median, range / 4.0;
    }
    if (!mean.admissible(state.alpha))
    {
        throw InitializationError("no default starting point for this mean function; supply init");
    }

    std::vector<double> x_values;
    state.x.reserve(data.size());
    for (const auto& ind : data)
    {
        const double top = ind.y.maxCoeff();
        state.x.push_back(VectorXd::Constant(q, top));
        x_values.push_back(top);
    }
    state.mu_x = VectorXd::Constant(
        q,
        x_values.empty() ? config.hyper.c1.size() > 0 ? config.hyper.c1[0] : 0.0
                         : std::accumulate(x_values.begin(), x_values.end(), 0.0)
                               / static_cast<double>(x_values.size()));
    double var_x = sample_variance(x_values);
    if (!(var_x > 1e-8))
    {
        var_x = 1.0;
    }
    state.sigma_x = var_x * MatrixXd::Identity(q, q);

    std::vector<double> residuals;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        const VectorXd r = data[i].y - mean.value(state.alpha, state.x[i], data[i].times);
        residuals.insert(residuals.end(), r.data(), r.data() + r.size());
    }
    double var_eps = sample_variance(residuals);
    if (!(var_eps > 1e-8))
    {
        var_eps = 1.0;
    }
    state.sigma2_eps = var_eps;
    state.beta = VectorXd::Zero(k + q);
    state.rho = config.error_model == ErrorModel::car1 ? 0.5 : 0.0;
    state.phi = 1.0;
    return state;
}

GibbsSampler::GibbsSampler(
    std::span<const Individual> data,
    const FitConfig& config,
    std::shared_ptr<const MeanFunction> mean)
    : data_(data), config_(config), spec_(model_spec(config, std::move(mean)))
{
    config_.validate();
    for (const auto& ind : data_)
    {
        validate(ind);
    }
    const Eigen::Index p = spec_.mean->alpha_dim();
    const Eigen::Index q = spec_.mean->x_dim();
    hyper_ = config_.hyper.resolved(p, q, covariate_dim(data_) + q);
    rng_ = make_stream(config_.seed, 0);
    x_rngs_.reserve(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i)
    {
        x_rngs_.push_back(make_stream(config_.seed, 1, i));
    }
    for (const char* block : {"x", "alpha", "beta", "rho"})
    {
        acceptance_[block] = {};
    }
    if (config_.error_model != ErrorModel::car1)
    {
        acceptance_.erase("rho");
    }
}

void GibbsSampler::refresh_factors(double rho)
{
    if (rho == factors_rho_ && factors_.size() == data_.size())
    {
        return;
    }
    factors_.clear();
    factors_.reserve(data_.size());
    for (const auto& ind : data_)
    {
        factors_.emplace_back(rho, ind.times, ind.id);
    }
    factors_rho_ = rho;
}

void GibbsSampler::update_x(ParameterState& state)
{
    refresh_factors(state.rho);
    const std::size_t m = data_.size();
    std::vector<VectorXd> next(m);
    std::vector<unsigned char> accepted(m, 0);
    const bool with_likelihood = !config_.prior_only;

    auto update_one = [&](std::size_t i) {
        const LogTarget target = x_conditional(data_[i], state, factors_[i], spec_, with_likelihood);
        const LaplaceResult laplace = laplace_proposal(target, state.x[i]);
        MhStep step = mh_independence_step(state.x[i], target, laplace.proposal, x_rngs_[i]);
        next[i] = std::move(step.value);
        accepted[i] = step.accepted ? 1 : 0;
    };

    if (config_.threads > 1 && m > 1)
    {
        tbb::task_arena arena(config_.threads);
        arena.execute([&] {
            tbb::parallel_for(std::size_t{0}, m, [&](std::size_t i) {
                try
                {
                    update_one(i);
                }
                catch (const Error& e)
                {
                    throw NumericError(e.what(), data_[i].id);
                }
            });
        });
    }
    else
    {
        for (std::size_t i = 0; i < m; ++i)
        {
            try
            {
                update_one(i);
            }
            catch (const Error& e)
            {
                throw NumericError(e.what(), data_[i].id);
            }
        }
    }

    for (std::size_t i = 0; i < m; ++i)
    {
        state.x[i] = std::move(next[i]);
    }
    auto& tally = acceptance_["x"];
    tally.proposed += static_cast<std::int64_t>(m);
    tally.accepted += std::count(accepted.begin(), accepted.end(), 1);
}

void GibbsSampler::update_alpha(ParameterState& state, bool refresh)
{
    refresh_factors(state.rho);
    const LogTarget target
        = alpha_conditional(data_, state, factors_, hyper_, spec_, !config_.prior_only);
    if (refresh || !alpha_proposal_)
    {
        alpha_proposal_ = laplace_proposal(target, state.alpha).proposal;
    }
    MhStep step = mh_independence_step(state.alpha, target, *alpha_proposal_, rng_);
    state.alpha = std::move(step.value);
    auto& tally = acceptance_["alpha"];
    ++tally.proposed;
    tally.accepted += step.accepted ? 1 : 0;
}

void GibbsSampler::update_beta(ParameterState& state, bool refresh)
{
    const LogTarget target = beta_conditional(data_, state, hyper_, spec_, !config_.prior_only);
    if (refresh || !beta_proposal_)
    {
        beta_proposal_ = laplace_proposal(target, state.beta).proposal;
    }
    MhStep step = mh_independence_step(state.beta, target, *beta_proposal_, rng_);
    state.beta = std::move(step.value);
    auto& tally = acceptance_["beta"];
    ++tally.proposed;
    tally.accepted += step.accepted ? 1 : 0;
}

void GibbsSampler::update_sigma_eps(ParameterState& state)
{
    double rss = 0.0;
    Eigen::Index n = 0;
    if (!config_.prior_only)
    {
        refresh_factors(state.rho);
        for (std::size_t i = 0; i < data_.size(); ++i)
        {
            rss += residual_quad_form(data_[i], state.alpha, state.x[i], factors_[i], *spec_.mean);
            n += data_[i].n_obs();
        }
    }
    const InverseGamma cond = sigma_eps_conditional(rss, n, hyper_);
    state.sigma2_eps = sample_inverse_gamma(cond.shape, cond.rate, rng_);
}

void GibbsSampler::update_rho(ParameterState& state, bool refresh)
{
    const LogTarget target = rho_conditional(data_, state, hyper_, spec_, !config_.prior_only);
    const VectorXd current = VectorXd::Constant(1, state.rho);
    if (refresh || !rho_proposal_)
    {
        // The rho conditional often peaks on the boundary, where the mode
        // search stops at a start-dependent point; starting from the middle
        // of the support keeps the proposal independent of the current rho.
        const double upper = std::min(hyper_.rho_upper, kRhoCeiling);
        const VectorXd start = VectorXd::Constant(1, 0.5 * (hyper_.rho_lower + upper));
        GaussianProposal proposal = laplace_proposal(target, start).proposal;
        proposal.truncate(hyper_.rho_lower, upper);
        rho_proposal_ = std::move(proposal);
    }
    const MhStep step = mh_independence_step(current, target, *rho_proposal_, rng_);
    state.rho = step.value[0];
    auto& tally = acceptance_["rho"];
    ++tally.proposed;
    tally.accepted += step.accepted ? 1 : 0;
}

void GibbsSampler::update_phi(ParameterState& state)
{
    double shape = hyper_.phi_prior.shape;
    double rate = hyper_.phi_prior.rate;
    if (!config_.prior_only)
    {
        for (std::size_t i = 0; i < data_.size(); ++i)
        {
            const double r = data_[i].outcome - linear_predictor(data_[i], state.beta, state.x[i]);
            rate += 0.5 * r * r;
        }
        shape += 0.5 * static_cast<double>(data_.size());
    }
    state.phi = sample_inverse_gamma(shape, rate, rng_);
}

void GibbsSampler::sweep(ParameterState& state)
{
    if (state.x.size() != data_.size())
    {
        throw InvariantViolation("state must hold one random effect per individual");
    }
    const bool refresh = sweeps_ % config_.proposal_refresh == 0;

    run_block("x", [&] { update_x(state); });
    run_block("alpha", [&] { update_alpha(state, refresh); });
    run_block("beta", [&] { update_beta(state, refresh); });
    run_block("mu_x", [&] { state.mu_x = draw_mu_x(state.x, state.sigma_x, hyper_, rng_); });
    run_block("sigma_x", [&] { state.sigma_x = draw_sigma_x(state.x, state.mu_x, hyper_, rng_); });
    run_block("sigma2_eps", [&] { update_sigma_eps(state); });
    if (spec_.error_model == ErrorModel::car1)
    {
        run_block("rho", [&] { update_rho(state, refresh); });
    }
    if (!has_fixed_dispersion(spec_.family))
    {
        run_block("phi", [&] { update_phi(state); });
    }
    ++sweeps_;
}

ParameterState gibbs_sweep(
    const ParameterState& state,
    std::span<const Individual> data,
    const FitConfig& config,
    Rng& rng,
    std::shared_ptr<const MeanFunction> mean)
{
    FitConfig one = config;
    one.seed = rng();
    one.iterations = std::max<std::int64_t>(one.iterations, 1);
    one.burn_in = std::min<std::int64_t>(one.burn_in, one.iterations - 1);
    one.thin = 1;
    GibbsSampler sampler(data, one, std::move(mean));
    ParameterState next = state;
    sampler.sweep(next);
    return next;
}

ChainStore run_chain(
    std::span<const Individual> data,
    const FitConfig& config,
    std::shared_ptr<const MeanFunction> mean)
{
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    GibbsSampler sampler(data, config, mean);

    ParameterState state = config.init ? *config.init : default_initial_state(data, config, *mean);
    if (state.x.size() != data.size())
    {
        throw InitializationError("initial state must hold one random effect per individual");
    }
    try
    {
        validate(state);
    }
    catch (const InvalidParameter& e)
    {
        throw InitializationError(std::string("initial state: ") + e.what());
    }
    if (config.error_model == ErrorModel::independent && state.rho != 0.0)
    {
        throw InitializationError("initial state: rho must be 0 under independent errors");
    }
    double initial = 0.0;
    try
    {
        const ModelSpec& spec = sampler.spec();
        if (config.prior_only)
        {
            initial = log_prior(state, sampler.hyper(), spec);
            for (const auto& xi : state.x)
            {
                initial += random_effect_logpdf(xi, state);
            }
        }
        else
        {
            initial = joint_unnorm_logpost(data, state, sampler.hyper(), spec);
        }
    }
    catch (const Error& e)
    {
        throw InitializationError(std::string("initial posterior: ") + e.what());
    }
    if (!std::isfinite(initial))
    {
        throw InitializationError("posterior density is not finite at the initial state");
    }

    ChainStore store;
    const auto retained = static_cast<std::size_t>(config.retained());
    store.draws.reserve(retained);
    store.iterations.reserve(retained);
    for (std::int64_t it = 1; it <= config.iterations; ++it)
    {
        try
        {
            sampler.sweep(state);
        }
        catch (const SamplerError& e)
        {
            throw SamplerError(e.block(), it, e.detail());
        }
        if (it > config.burn_in && (it - config.burn_in) % config.thin == 0)
        {
            store.draws.push_back(state);
            store.iterations.push_back(it);
        }
    }

    store.meta.config = config;
    store.meta.ids.reserve(data.size());
    for (const auto& ind : data)
    {
        store.meta.ids.push_back(ind.id);
    }
    store.meta.acceptance = sampler.acceptance();
    store.meta.wall_clock_seconds
        = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return store;
}

}  // namespace jointmodel
