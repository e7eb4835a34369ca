#pragma once

#include "jointmodel/laplace.h"

namespace jointmodel
{

struct MhStep
{
    VectorXd value;
    bool accepted = false;
    double log_target = 0.0;  // target at `value`
};

// log of min{1, [q(current) / q(candidate)] [pi(candidate) / pi(current)]}.
double mh_log_acceptance(
    const VectorXd& current,
    double current_log_target,
    const VectorXd& candidate,
    double candidate_log_target,
    const GaussianProposal& proposal);

// One Metropolis-Hastings step with a Gaussian (Laplace) proposal. Throws
// InvariantViolation when the target is not finite at `current`.
MhStep mh_independence_step(
    const VectorXd& current,
    const LogTarget& target,
    const GaussianProposal& proposal,
    Rng& rng);

// Variant that reuses a known target value at `current`.
MhStep mh_independence_step(
    const VectorXd& current,
    double current_log_target,
    const LogTarget& target,
    const GaussianProposal& proposal,
    Rng& rng);

}  // namespace jointmodel
