#pragma once

#include <functional>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "jointmodel/random.h"

namespace jointmodel
{

// Unnormalized log density over R^d, optionally with its analytic gradient
// and Hessian.
struct LogTarget
{
    std::function<double(const VectorXd&)> value;
    std::function<VectorXd(const VectorXd&)> gradient;
    std::function<MatrixXd(const VectorXd&)> hessian;

    double operator()(const VectorXd& x) const { return value(x); }
};

enum class ProposalKind
{
    laplace,      // N(mode, (-H)^-1)
    ridge,        // N(mode, (-H + tau I)^-1) after a failed factorization
    random_walk,  // N(current, scale^2 I), symmetric
};

// Gaussian Metropolis proposal. An optional defensive component mixes in
// N(mean, scale^2 cov) with a small weight so that states in the tails of
// the main component can still be left. A one-dimensional proposal may be
// truncated to [lower, upper]; each component is renormalized accordingly.
class GaussianProposal
{
public:
    GaussianProposal() = default;
    GaussianProposal(VectorXd mean, MatrixXd cov, ProposalKind kind = ProposalKind::laplace);

    static GaussianProposal random_walk(Eigen::Index dim, double scale);

    // Must be called before truncate().
    void set_defensive(double weight, double scale);
    void truncate(double lower, double upper);

    ProposalKind kind() const { return kind_; }
    const VectorXd& mean() const { return mean_; }
    const MatrixXd& cov() const { return cov_; }
    double defensive_weight() const { return defensive_weight_; }
    bool symmetric() const { return kind_ == ProposalKind::random_walk; }

    VectorXd sample(const VectorXd& current, Rng& rng) const;

    // log q(x); for random-walk proposals the value is relative to `current`.
    double log_density(const VectorXd& x, const VectorXd& current) const;

private:
    VectorXd mean_;
    MatrixXd cov_;
    ProposalKind kind_ = ProposalKind::laplace;
    Eigen::LLT<MatrixXd> llt_;
    double log_det_ = 0.0;
    double rw_scale_ = 0.0;
    double defensive_weight_ = 0.0;
    double defensive_scale_ = 1.0;
    bool truncated_ = false;
    double lower_ = 0.0;
    double upper_ = 0.0;
    double log_mass_ = 0.0;
    double log_mass_wide_ = 0.0;

    double truncated_draw(double sd, Rng& rng) const;
};

struct LaplaceOptions
{
    double gradient_tolerance = 1e-6;
    int max_iterations = 100;
    int max_halvings = 50;
    double ridge_start = 1e-6;
    double ridge_limit = 1e3;
    double random_walk_scale = 0.1;
    double defensive_weight = 0.1;
    double defensive_scale = 5.0;
};

struct LaplaceResult
{
    GaussianProposal proposal;
    VectorXd mode;
    int iterations = 0;
    bool converged = false;
};

// Damped Newton search for the mode of `target` starting at `init`; the
// proposal covariance is the inverse negative Hessian there. Derivatives
// not supplied by the target come from central finite differences. A
// non-PD Hessian gets a doubling ridge; past the ridge limit the result is
// a random-walk proposal. Laplace and ridge proposals carry the defensive
// component from `options`. Throws NumericError if the target is not finite
// at `init` or stays non-finite after max_halvings step halvings.
LaplaceResult laplace_proposal(
    const LogTarget& target,
    const VectorXd& init,
    const LaplaceOptions& options = {});

VectorXd numeric_gradient(const LogTarget& target, const VectorXd& x);
MatrixXd numeric_hessian(const LogTarget& target, const VectorXd& x);

}  // namespace jointmodel
