#pragma once

#include <memory>

#include <Eigen/Core>

namespace jointmodel
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Mean curve g(alpha, x; t) of the longitudinal submodel. Subclasses
// that do not override the Jacobians get central finite differences with
// step 1e-6 * max(1, |component|).
class MeanFunction
{
public:
    virtual ~MeanFunction() = default;

    virtual Eigen::Index alpha_dim() const = 0;
    virtual Eigen::Index x_dim() const = 0;

    // Throws InvalidParameter when alpha is outside the function's domain.
    virtual VectorXd value(
        const VectorXd& alpha,
        const VectorXd& x,
        const VectorXd& times) const
        = 0;

    // n x p matrix of d g / d alpha.
    virtual MatrixXd jacobian_alpha(
        const VectorXd& alpha,
        const VectorXd& x,
        const VectorXd& times) const;

    // n x q matrix of d g / d x.
    virtual MatrixXd jacobian_x(
        const VectorXd& alpha,
        const VectorXd& x,
        const VectorXd& times) const;

    // True when g is affine in x for fixed alpha, so the x-Jacobian does
    // not depend on x.
    virtual bool linear_in_x() const { return false; }

    // Cheap domain check used by samplers before evaluating.
    virtual bool admissible(const VectorXd& alpha) const
    {
        return alpha.size() == alpha_dim() && alpha.allFinite();
    }
};

// g_j = x / (1 + exp(-(t_j - alpha_1) / alpha_2)), the built-in default.
class LogisticGrowth final : public MeanFunction
{
public:
    Eigen::Index alpha_dim() const override { return 2; }
    Eigen::Index x_dim() const override { return 1; }

    VectorXd value(
        const VectorXd& alpha,
        const VectorXd& x,
        const VectorXd& times) const override;

    MatrixXd jacobian_alpha(
        const VectorXd& alpha,
        const VectorXd& x,
        const VectorXd& times) const override;

    MatrixXd jacobian_x(
        const VectorXd& alpha,
        const VectorXd& x,
        const VectorXd& times) const override;

    bool admissible(const VectorXd& alpha) const override;
    bool linear_in_x() const override { return true; }
};

std::shared_ptr<const MeanFunction> default_mean_function();

// Scalar-random-effect convenience wrapper around LogisticGrowth.
VectorXd growth_mean(const VectorXd& alpha, double x, const VectorXd& times);

}  // namespace jointmodel
