#include "jointmodel/error_covariance.h"

#include <cmath>

#include "jointmodel/errors.h"

namespace jointmodel
{

namespace
{

void check_rho(double rho)
{
    if (!(rho >= 0.0 && rho < 1.0))
    {
        throw InvalidParameter("CAR(1) correlation rho must lie in [0, 1)");
    }
}

void check_distinct_times(double rho, const VectorXd& times, const std::string& id)
{
    if (rho == 0.0)
    {
        return;
    }
    for (Eigen::Index a = 0; a < times.size(); ++a)
    {
        for (Eigen::Index b = a + 1; b < times.size(); ++b)
        {
            if (times[a] == times[b])
            {
                throw SingularCovariance("repeated observation time gives a singular CAR(1) covariance", id);
            }
        }
    }
}

}  // namespace

MatrixXd car1_correlation(double rho, const VectorXd& times)
{
    check_rho(rho);
    const Eigen::Index n = times.size();
    MatrixXd corr(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
    {
        corr(a, a) = 1.0;
        for (Eigen::Index b = a + 1; b < n; ++b)
        {
            const double c = std::pow(rho, std::abs(times[a] - times[b]));
            corr(a, b) = c;
            corr(b, a) = c;
        }
    }
    return corr;
}

MatrixXd build_error_cov(double sigma2, double rho, const VectorXd& times)
{
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    {
        throw InvalidParameter("error variance sigma2 must be positive");
    }
    check_rho(rho);
    check_distinct_times(rho, times, {});
    return sigma2 * car1_correlation(rho, times);
}

CorrelationFactor::CorrelationFactor(double rho, const VectorXd& times, const std::string& id)
    : rho_(rho), size_(times.size())
{
    check_rho(rho);
    if (rho == 0.0 || size_ == 1)
    {
        identity_ = true;
        log_det_ = 0.0;
        return;
    }
    check_distinct_times(rho, times, id);
    identity_ = false;
    llt_.compute(car1_correlation(rho, times));
    if (llt_.info() != Eigen::Success)
    {
        throw SingularCovariance("CAR(1) covariance factorization failed", id);
    }
    const auto& l = llt_.matrixLLT();
    double log_det = 0.0;
    for (Eigen::Index k = 0; k < size_; ++k)
    {
        const double d = l(k, k);
        if (!(d > 0.0))
        {
            throw SingularCovariance("CAR(1) covariance is numerically singular", id);
        }
        log_det += std::log(d);
    }
    log_det_ = 2.0 * log_det;
}

double CorrelationFactor::quad_form(const VectorXd& r) const
{
    if (identity_)
    {
        return r.squaredNorm();
    }
    return llt_.matrixL().solve(r).squaredNorm();
}

VectorXd CorrelationFactor::solve(const VectorXd& r) const
{
    if (identity_)
    {
        return r;
    }
    return llt_.solve(r);
}

VectorXd CorrelationFactor::correlate(const VectorXd& z) const
{
    if (identity_)
    {
        return z;
    }
    return llt_.matrixL() * z;
}

}  // namespace jointmodel
