#include "jointmodel/mean_function.h"

#include <algorithm>
#include <cmath>

#include "jointmodel/errors.h"

namespace jointmodel
{

namespace
{

double fd_step(double v)
{
    return 1e-6 * std::max(1.0, std::abs(v));
}

}  // namespace

MatrixXd MeanFunction::jacobian_alpha(
    const VectorXd& alpha,
    const VectorXd& x,
    const VectorXd& times) const
{
    MatrixXd jac(times.size(), alpha.size());
    VectorXd shifted = alpha;
    for (Eigen::Index k = 0; k < alpha.size(); ++k)
    {
        const double h = fd_step(alpha[k]);
        shifted[k] = alpha[k] + h;
        const VectorXd up = value(shifted, x, times);
        shifted[k] = alpha[k] - h;
        const VectorXd down = value(shifted, x, times);
        shifted[k] = alpha[k];
        jac.col(k) = (up - down) / (2.0 * h);
    }
    return jac;
}

MatrixXd MeanFunction::jacobian_x(
    const VectorXd& alpha,
    const VectorXd& x,
    const VectorXd& times) const
{
    MatrixXd jac(times.size(), x.size());
    VectorXd shifted = x;
    for (Eigen::Index k = 0; k < x.size(); ++k)
    {
        const double h = fd_step(x[k]);
        shifted[k] = x[k] + h;
        const VectorXd up = value(alpha, shifted, times);
        shifted[k] = x[k] - h;
        const VectorXd down = value(alpha, shifted, times);
        shifted[k] = x[k];
        jac.col(k) = (up - down) / (2.0 * h);
    }
    return jac;
}

namespace
{

void check_logistic_alpha(const VectorXd& alpha)
{
    if (alpha.size() != 2)
    {
        throw InvalidParameter("logistic growth curve needs exactly two fixed effects");
    }
    if (alpha[1] == 0.0 || !alpha.allFinite())
    {
        throw InvalidParameter("logistic growth curve requires finite alpha with alpha_2 != 0");
    }
}

// 1 / (1 + exp(-z)) without overflow for large |z|.
double sigmoid(double z)
{
    if (z >= 0.0)
    {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

bool LogisticGrowth::admissible(const VectorXd& alpha) const
{
    return alpha.size() == 2 && alpha.allFinite() && alpha[1] != 0.0;
}

VectorXd LogisticGrowth::value(
    const VectorXd& alpha,
    const VectorXd& x,
    const VectorXd& times) const
{
    check_logistic_alpha(alpha);
    VectorXd g(times.size());
    for (Eigen::Index j = 0; j < times.size(); ++j)
    {
        g[j] = x[0] * sigmoid((times[j] - alpha[0]) / alpha[1]);
    }
    return g;
}

MatrixXd LogisticGrowth::jacobian_alpha(
    const VectorXd& alpha,
    const VectorXd& x,
    const VectorXd& times) const
{
    check_logistic_alpha(alpha);
    MatrixXd jac(times.size(), 2);
    for (Eigen::Index j = 0; j < times.size(); ++j)
    {
        const double z = (times[j] - alpha[0]) / alpha[1];
        const double s = sigmoid(z);
        const double ds = s * (1.0 - s);
        jac(j, 0) = -x[0] * ds / alpha[1];
        jac(j, 1) = -x[0] * ds * z / alpha[1];
    }
    return jac;
}

MatrixXd LogisticGrowth::jacobian_x(
    const VectorXd& alpha,
    const VectorXd& /*x*/,
    const VectorXd& times) const
{
    check_logistic_alpha(alpha);
    MatrixXd jac(times.size(), 1);
    for (Eigen::Index j = 0; j < times.size(); ++j)
    {
        jac(j, 0) = sigmoid((times[j] - alpha[0]) / alpha[1]);
    }
    return jac;
}

std::shared_ptr<const MeanFunction> default_mean_function()
{
    static const std::shared_ptr<const MeanFunction> instance
        = std::make_shared<LogisticGrowth>();
    return instance;
}

VectorXd growth_mean(const VectorXd& alpha, double x, const VectorXd& times)
{
    return LogisticGrowth{}.value(alpha, VectorXd::Constant(1, x), times);
}

}  // namespace jointmodel
