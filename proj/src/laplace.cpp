#include "jointmodel/laplace.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "jointmodel/errors.h"

namespace jointmodel
{

namespace
{

constexpr double kLog2Pi = 1.8378770664093454836;

double gradient_step(double v)
{
    return 1e-5 * std::max(1.0, std::abs(v));
}

double hessian_step(double v)
{
    return 1e-4 * std::max(1.0, std::abs(v));
}

VectorXd evaluate_gradient(const LogTarget& target, const VectorXd& x)
{
    return target.gradient ? target.gradient(x) : numeric_gradient(target, x);
}

MatrixXd evaluate_hessian(const LogTarget& target, const VectorXd& x)
{
    if (target.hessian)
    {
        return target.hessian(x);
    }
    if (!target.gradient)
    {
        return numeric_hessian(target, x);
    }
    const Eigen::Index d = x.size();
    MatrixXd hess(d, d);
    VectorXd shifted = x;
    for (Eigen::Index k = 0; k < d; ++k)
    {
        const double h = gradient_step(x[k]);
        shifted[k] = x[k] + h;
        const VectorXd up = target.gradient(shifted);
        shifted[k] = x[k] - h;
        const VectorXd down = target.gradient(shifted);
        shifted[k] = x[k];
        hess.col(k) = (up - down) / (2.0 * h);
    }
    return 0.5 * (hess + hess.transpose());
}

// Smallest ridge tau >= 0 (doubling from `start`) making m + tau I
// positive definite, or a negative value past `limit`.
double find_ridge(const MatrixXd& m, double start, double limit, Eigen::LLT<MatrixXd>& llt)
{
    const MatrixXd id = MatrixXd::Identity(m.rows(), m.cols());
    llt.compute(m);
    if (llt.info() == Eigen::Success)
    {
        return 0.0;
    }
    for (double tau = start; tau <= limit; tau *= 2.0)
    {
        llt.compute(m + tau * id);
        if (llt.info() == Eigen::Success)
        {
            return tau;
        }
    }
    return -1.0;
}

}  // namespace

VectorXd numeric_gradient(const LogTarget& target, const VectorXd& x)
{
    VectorXd grad(x.size());
    VectorXd shifted = x;
    for (Eigen::Index k = 0; k < x.size(); ++k)
    {
        const double h = gradient_step(x[k]);
        shifted[k] = x[k] + h;
        const double up = target.value(shifted);
        shifted[k] = x[k] - h;
        const double down = target.value(shifted);
        shifted[k] = x[k];
        grad[k] = (up - down) / (2.0 * h);
    }
    return grad;
}

MatrixXd numeric_hessian(const LogTarget& target, const VectorXd& x)
{
    const Eigen::Index d = x.size();
    MatrixXd hess(d, d);
    const double f0 = target.value(x);
    VectorXd shifted = x;
    for (Eigen::Index a = 0; a < d; ++a)
    {
        const double ha = hessian_step(x[a]);
        shifted[a] = x[a] + ha;
        const double up = target.value(shifted);
        shifted[a] = x[a] - ha;
        const double down = target.value(shifted);
        shifted[a] = x[a];
        hess(a, a) = (up - 2.0 * f0 + down) / (ha * ha);
        for (Eigen::Index b = 0; b < a; ++b)
        {
            const double hb = hessian_step(x[b]);
            double corners[4];
            int c = 0;
            for (const double sa : {1.0, -1.0})
            {
                for (const double sb : {1.0, -1.0})
                {
                    shifted[a] = x[a] + sa * ha;
                    shifted[b] = x[b] + sb * hb;
                    corners[c++] = target.value(shifted);
                }
            }
            shifted[a] = x[a];
            shifted[b] = x[b];
            const double v = (corners[0] - corners[1] - corners[2] + corners[3]) / (4.0 * ha * hb);
            hess(a, b) = v;
            hess(b, a) = v;
        }
    }
    return hess;
}

GaussianProposal::GaussianProposal(VectorXd mean, MatrixXd cov, ProposalKind kind)
    : mean_(std::move(mean)), cov_(std::move(cov)), kind_(kind)
{
    llt_.compute(cov_);
    if (llt_.info() != Eigen::Success)
    {
        throw NumericError("proposal covariance is not positive definite");
    }
    log_det_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

GaussianProposal GaussianProposal::random_walk(Eigen::Index dim, double scale)
{
    GaussianProposal p(
        VectorXd::Zero(dim),
        scale * scale * MatrixXd::Identity(dim, dim),
        ProposalKind::random_walk);
    p.rw_scale_ = scale;
    return p;
}

void GaussianProposal::set_defensive(double weight, double scale)
{
    if (!(weight >= 0.0 && weight < 1.0) || !(scale >= 1.0))
    {
        throw InvalidParameter("defensive weight must lie in [0, 1) and scale be >= 1");
    }
    if (truncated_)
    {
        throw InvalidParameter("set_defensive must precede truncate");
    }
    if (kind_ == ProposalKind::random_walk)
    {
        return;
    }
    defensive_weight_ = weight;
    defensive_scale_ = scale;
}

void GaussianProposal::truncate(double lower, double upper)
{
    if (mean_.size() != 1)
    {
        throw InvalidParameter("only one-dimensional proposals can be truncated");
    }
    if (kind_ == ProposalKind::random_walk)
    {
        // Truncating a random walk would break its symmetry; out-of-support
        // candidates are rejected by the target instead.
        return;
    }
    auto mass_in = [&](double sd) {
        const boost::math::normal_distribution<double> normal(mean_[0], sd);
        return boost::math::cdf(normal, upper) - boost::math::cdf(normal, lower);
    };
    const double sd = std::sqrt(cov_(0, 0));
    const double mass = mass_in(sd);
    const double mass_wide = mass_in(defensive_scale_ * sd);
    if (!(mass > 1e-300) && !(defensive_weight_ > 0.0 && mass_wide > 1e-300))
    {
        // Proposal mass entirely outside the support: fall back to a uniform
        // proposal over the interval, expressed as a wide Gaussian.
        const double mid = 0.5 * (lower + upper);
        const double width = upper - lower;
        const double w = defensive_weight_;
        const double k = defensive_scale_;
        *this = GaussianProposal(VectorXd::Constant(1, mid), MatrixXd::Constant(1, 1, width * width), kind_);
        defensive_weight_ = w;
        defensive_scale_ = k;
        truncate(lower, upper);
        return;
    }
    truncated_ = true;
    lower_ = lower;
    upper_ = upper;
    log_mass_ = mass > 0.0 ? std::log(mass) : -std::numeric_limits<double>::infinity();
    log_mass_wide_ = mass_wide > 0.0 ? std::log(mass_wide) : -std::numeric_limits<double>::infinity();
    if (!(mass > 1e-300))
    {
        // Only the defensive component reaches the support.
        defensive_weight_ = 1.0;
    }
}

double GaussianProposal::truncated_draw(double sd, Rng& rng) const
{
    const boost::math::normal_distribution<double> normal(mean_[0], sd);
    const double lo = boost::math::cdf(normal, lower_);
    const double hi = boost::math::cdf(normal, upper_);
    // Plain rejection when most of the mass is inside, inverse CDF otherwise.
    if (hi - lo > 0.25)
    {
        for (;;)
        {
            const double c = mean_[0] + sd * standard_normal(rng);
            if (c >= lower_ && c <= upper_)
            {
                return c;
            }
        }
    }
    const double u = lo + (hi - lo) * uniform01(rng);
    const double c = boost::math::quantile(normal, std::clamp(u, 1e-300, 1.0 - 1e-16));
    return std::clamp(c, lower_, upper_);
}

VectorXd GaussianProposal::sample(const VectorXd& current, Rng& rng) const
{
    if (kind_ == ProposalKind::random_walk)
    {
        return current + rw_scale_ * standard_normal_vector(current.size(), rng);
    }
    const bool wide = defensive_weight_ > 0.0 && uniform01(rng) < defensive_weight_;
    const double scale = wide ? defensive_scale_ : 1.0;
    if (truncated_)
    {
        return VectorXd::Constant(1, truncated_draw(scale * std::sqrt(cov_(0, 0)), rng));
    }
    const VectorXd step = llt_.matrixL() * standard_normal_vector(mean_.size(), rng);
    return mean_ + scale * step;
}

double GaussianProposal::log_density(const VectorXd& x, const VectorXd& current) const
{
    const VectorXd& centre = kind_ == ProposalKind::random_walk ? current : mean_;
    if (truncated_ && (x[0] < lower_ || x[0] > upper_))
    {
        return -std::numeric_limits<double>::infinity();
    }
    const VectorXd z = llt_.matrixL().solve(x - centre);
    const double d = static_cast<double>(x.size());
    const double main = -0.5 * (d * kLog2Pi + log_det_ + z.squaredNorm()) - log_mass_;
    if (defensive_weight_ <= 0.0)
    {
        return main;
    }
    const double k = defensive_scale_;
    const double wide = -0.5 * (d * kLog2Pi + log_det_ + 2.0 * d * std::log(k) + z.squaredNorm() / (k * k))
        - log_mass_wide_;
    if (defensive_weight_ >= 1.0)
    {
        return wide;
    }
    const double a = std::log1p(-defensive_weight_) + main;
    const double b = std::log(defensive_weight_) + wide;
    const double hi = std::max(a, b);
    return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

LaplaceResult laplace_proposal(
    const LogTarget& target,
    const VectorXd& init,
    const LaplaceOptions& options)
{
    VectorXd x = init;
    double fx = target.value(x);
    if (!std::isfinite(fx))
    {
        throw NumericError("target is not finite at the Laplace starting point");
    }

    LaplaceResult result;
    const Eigen::Index d = x.size();
    Eigen::LLT<MatrixXd> llt;
    for (result.iterations = 0; result.iterations < options.max_iterations; ++result.iterations)
    {
        const VectorXd grad = evaluate_gradient(target, x);
        if (!grad.allFinite())
        {
            break;
        }
        if (grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance)
        {
            result.converged = true;
            break;
        }
        MatrixXd neg_hess = -evaluate_hessian(target, x);
        VectorXd direction;
        if (neg_hess.allFinite() && find_ridge(neg_hess, options.ridge_start, 1e12, llt) >= 0.0)
        {
            direction = llt.solve(grad);
        }
        else
        {
            direction = grad / std::max(1.0, grad.norm());
        }

        double step = 1.0;
        VectorXd candidate = x + direction;
        double fc = target.value(candidate);
        int halvings = 0;
        while (!(std::isfinite(fc) && fc >= fx - 1e-12 * (1.0 + std::abs(fx))))
        {
            if (++halvings > options.max_halvings)
            {
                break;
            }
            step *= 0.5;
            candidate = x + step * direction;
            fc = target.value(candidate);
        }
        if (halvings > options.max_halvings)
        {
            if (!std::isfinite(fc))
            {
                throw NumericError("target stayed non-finite after step halving in Laplace search");
            }
            // No ascent possible along the Newton direction.
            break;
        }
        const bool stalled = (candidate - x).lpNorm<Eigen::Infinity>() == 0.0;
        x = candidate;
        fx = fc;
        if (stalled)
        {
            break;
        }
    }

    result.mode = x;
    const MatrixXd neg_hess = -evaluate_hessian(target, x);
    if (neg_hess.allFinite())
    {
        const double tau = find_ridge(neg_hess, options.ridge_start, options.ridge_limit, llt);
        if (tau >= 0.0)
        {
            MatrixXd cov = llt.solve(MatrixXd::Identity(d, d));
            cov = 0.5 * (cov + cov.transpose());
            result.proposal = GaussianProposal(
                x, std::move(cov), tau == 0.0 ? ProposalKind::laplace : ProposalKind::ridge);
            result.proposal.set_defensive(options.defensive_weight, options.defensive_scale);
            return result;
        }
    }
    result.proposal = GaussianProposal::random_walk(d, options.random_walk_scale);
    return result;
}

}  // namespace jointmodel
