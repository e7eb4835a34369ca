#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <string>

namespace jointmodel
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

// CAR(1) correlation matrix: entry (k1, k2) = rho^|t_k1 - t_k2|, with the
// diagonal fixed at 1 so rho = 0 reduces to the identity.
MatrixXd car1_correlation(double rho, const VectorXd& times);

// sigma2 * car1_correlation(rho, times). Throws InvalidParameter for
// sigma2 <= 0 or rho outside [0, 1), SingularCovariance for repeated
// times with rho > 0.
MatrixXd build_error_cov(double sigma2, double rho, const VectorXd& times);

// Cholesky factor of the unscaled CAR(1) correlation of one individual.
// The likelihood needs it once per (individual, rho); sigma2 enters only
// as a scalar.
class CorrelationFactor
{
public:
    CorrelationFactor() = default;

    // Throws SingularCovariance (tagged with id) if factorization fails.
    CorrelationFactor(double rho, const VectorXd& times, const std::string& id = {});

    double rho() const { return rho_; }
    Eigen::Index size() const { return size_; }

    // log det of the correlation matrix.
    double log_det() const { return log_det_; }

    // r' R^{-1} r.
    double quad_form(const VectorXd& r) const;

    // R^{-1} r.
    VectorXd solve(const VectorXd& r) const;

    // L z, used for sampling correlated errors.
    VectorXd correlate(const VectorXd& z) const;

private:
    double rho_ = 0.0;
    Eigen::Index size_ = 0;
    bool identity_ = true;
    double log_det_ = 0.0;
    Eigen::LLT<MatrixXd> llt_;
};

}  // namespace jointmodel
