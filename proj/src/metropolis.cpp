#include "jointmodel/metropolis.h"

#include <cmath>
#include <limits>

#include "jointmodel/errors.h"

namespace jointmodel
{

double mh_log_acceptance(
    const VectorXd& current,
    double current_log_target,
    const VectorXd& candidate,
    double candidate_log_target,
    const GaussianProposal& proposal)
{
    if (!(candidate_log_target > -std::numeric_limits<double>::infinity())
        || std::isnan(candidate_log_target))
    {
        return -std::numeric_limits<double>::infinity();
    }
    double log_ratio = candidate_log_target - current_log_target;
    if (!proposal.symmetric())
    {
        log_ratio += proposal.log_density(current, current) - proposal.log_density(candidate, current);
    }
    if (std::isnan(log_ratio))
    {
        return -std::numeric_limits<double>::infinity();
    }
    return std::min(0.0, log_ratio);
}

MhStep mh_independence_step(
    const VectorXd& current,
    double current_log_target,
    const LogTarget& target,
    const GaussianProposal& proposal,
    Rng& rng)
{
    if (!std::isfinite(current_log_target))
    {
        throw InvariantViolation("Metropolis-Hastings state outside the target support");
    }
    VectorXd candidate = proposal.sample(current, rng);
    const double candidate_log_target = target.value(candidate);
    const double log_accept = mh_log_acceptance(
        current, current_log_target, candidate, candidate_log_target, proposal);
    const double u = uniform01(rng);
    if (std::log(u) < log_accept)
    {
        return {std::move(candidate), true, candidate_log_target};
    }
    return {current, false, current_log_target};
}

MhStep mh_independence_step(
    const VectorXd& current,
    const LogTarget& target,
    const GaussianProposal& proposal,
    Rng& rng)
{
    return mh_independence_step(current, target.value(current), target, proposal, rng);
}

}  // namespace jointmodel
