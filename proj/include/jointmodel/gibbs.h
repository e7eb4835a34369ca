#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jointmodel/error_covariance.h"
#include "jointmodel/errors.h"
#include "jointmodel/laplace.h"
#include "jointmodel/likelihood.h"
#include "jointmodel/random.h"
#include "jointmodel/types.h"

namespace jointmodel
{

// Upper end of the rho support; keeps the CAR(1) factorization away from
// the singular limit rho -> 1.
inline constexpr double kRhoCeiling = 0.999;

struct FitConfig
{
    std::int64_t iterations = 2'000'000;
    std::int64_t burn_in = 10'000;
    std::int64_t thin = 50;
    std::uint64_t seed = 1;
    ErrorModel error_model = ErrorModel::car1;
    Family family = Family::bernoulli;
    Hyperparameters hyper = Hyperparameters::defaults();
    std::optional<ParameterState> init;

    // Worker threads for the random-effect updates; results do not depend on it.
    int threads = 1;
    // Sweeps between Laplace refreshes of the alpha, beta and rho proposals.
    int proposal_refresh = 10;
    // Drop the longitudinal and outcome likelihoods (prior sampling).
    bool prior_only = false;

    // Number of retained draws, floor((iterations - burn_in) / thin).
    std::int64_t retained() const;

    // Throws ConfigError naming the violated invariant.
    void validate() const;
};

ModelSpec model_spec(
    const FitConfig& config,
    std::shared_ptr<const MeanFunction> mean = default_mean_function());

struct AcceptanceTally
{
    std::int64_t proposed = 0;
    std::int64_t accepted = 0;

    double rate() const
    {
        return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed);
    }
};

struct ChainMeta
{
    FitConfig config;
    std::vector<std::string> ids;
    std::map<std::string, AcceptanceTally> acceptance;
    double wall_clock_seconds = 0.0;
};

// Retained post-burn-in draws, thinned.
struct ChainStore
{
    std::vector<ParameterState> draws;
    std::vector<std::int64_t> iterations;
    ChainMeta meta;

    std::size_t size() const { return draws.size(); }
};

// Error raised inside a sweep; names the block and, once run_chain has
// seen it, the iteration.
class SamplerError : public Error
{
public:
    SamplerError(const std::string& block, std::int64_t iteration, const std::string& what);

    const std::string& block() const { return block_; }
    std::int64_t iteration() const { return iteration_; }
    const std::string& detail() const { return detail_; }

private:
    std::string block_;
    std::string detail_;
    std::int64_t iteration_;
};

// Full-conditional log densities of the non-conjugate blocks, up to
// constants. The returned targets keep references to their arguments.
LogTarget x_conditional(
    const Individual& ind,
    const ParameterState& state,
    const CorrelationFactor& factor,
    const ModelSpec& spec,
    bool include_likelihood = true);

LogTarget alpha_conditional(
    std::span<const Individual> data,
    const ParameterState& state,
    std::span<const CorrelationFactor> factors,
    const Hyperparameters& hyper,
    const ModelSpec& spec,
    bool include_likelihood = true);

LogTarget beta_conditional(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    const ModelSpec& spec,
    bool include_likelihood = true);

// Supported on [rho_lower, min(rho_upper, kRhoCeiling)].
LogTarget rho_conditional(
    std::span<const Individual> data,
    const ParameterState& state,
    const Hyperparameters& hyper,
    const ModelSpec& spec,
    bool include_likelihood = true);

// Default starting point: alpha_1 = median time, alpha_2 = time range / 4,
// x_i = max(y_i), mu_x = mean x_i, sigma_x and sigma2_eps from sample
// variances, beta = 0, rho = 0.5 under car1.
ParameterState default_initial_state(
    std::span<const Individual> data,
    const FitConfig& config,
    const MeanFunction& mean = *default_mean_function());

// Metropolis-within-Gibbs engine. Owns the random streams and the cached
// proposals of the alpha, beta and rho blocks.
class GibbsSampler
{
public:
    GibbsSampler(
        std::span<const Individual> data,
        const FitConfig& config,
        std::shared_ptr<const MeanFunction> mean = default_mean_function());

    // One full update, in order: x_i, alpha, beta, mu_x, Sigma_X,
    // sigma2_eps, rho (car1 only), phi (free dispersion only).
    void sweep(ParameterState& state);

    const std::map<std::string, AcceptanceTally>& acceptance() const { return acceptance_; }
    const Hyperparameters& hyper() const { return hyper_; }
    const ModelSpec& spec() const { return spec_; }
    std::int64_t sweeps() const { return sweeps_; }

private:
    void refresh_factors(double rho);
    void update_x(ParameterState& state);
    void update_alpha(ParameterState& state, bool refresh);
    void update_beta(ParameterState& state, bool refresh);
    void update_rho(ParameterState& state, bool refresh);
    void update_sigma_eps(ParameterState& state);
    void update_phi(ParameterState& state);

    std::span<const Individual> data_;
    FitConfig config_;
    ModelSpec spec_;
    Hyperparameters hyper_;
    Rng rng_;
    std::vector<Rng> x_rngs_;
    std::vector<CorrelationFactor> factors_;
    double factors_rho_ = -1.0;
    std::optional<GaussianProposal> alpha_proposal_;
    std::optional<GaussianProposal> beta_proposal_;
    std::optional<GaussianProposal> rho_proposal_;
    std::map<std::string, AcceptanceTally> acceptance_;
    std::int64_t sweeps_ = 0;
};

// Single sweep with freshly built proposals; streams seeded from rng.
ParameterState gibbs_sweep(
    const ParameterState& state,
    std::span<const Individual> data,
    const FitConfig& config,
    Rng& rng,
    std::shared_ptr<const MeanFunction> mean = default_mean_function());

// Runs config.iterations sweeps and keeps every thin-th draw after burn-in.
ChainStore run_chain(
    std::span<const Individual> data,
    const FitConfig& config,
    std::shared_ptr<const MeanFunction> mean = default_mean_function());

}  // namespace jointmodel
