#pragma once

#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

#include "jointmodel/types.h"

namespace jmtest
{

using jointmodel::Individual;
using jointmodel::MatrixXd;
using jointmodel::ParameterState;
using jointmodel::VectorXd;

inline VectorXd vec(std::initializer_list<double> v)
{
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v)
    {
        out[k++] = x;
    }
    return out;
}

inline MatrixXd scalar_matrix(double v)
{
    return MatrixXd::Constant(1, 1, v);
}

inline Individual make_individual(
    const std::string& id,
    std::initializer_list<double> times,
    std::initializer_list<double> y,
    double outcome = 1.0)
{
    Individual ind;
    ind.id = id;
    ind.times = vec(times);
    ind.y = vec(y);
    ind.outcome = outcome;
    ind.covariates = VectorXd::Ones(1);
    return ind;
}

// State for the scalar-random-effect model with the given number of
// individuals, all X_i equal to mu.
inline ParameterState make_state(std::size_t m, double mu = 4.0)
{
    ParameterState s;
    s.alpha = vec({15.0, 7.0});
    s.beta = vec({-22.0, 5.0});
    s.mu_x = vec({mu});
    s.sigma_x = scalar_matrix(0.2);
    s.sigma2_eps = 0.2;
    s.rho = 0.9;
    s.phi = 1.0;
    s.x.assign(m, vec({mu}));
    return s;
}

// Sample mean and the standard error of that mean.
struct Moments
{
    double mean = 0.0;
    double var = 0.0;
    double se_mean = 0.0;
};

inline Moments moments(const std::vector<double>& v)
{
    Moments m;
    const double n = static_cast<double>(v.size());
    for (double x : v)
    {
        m.mean += x;
    }
    m.mean /= n;
    for (double x : v)
    {
        m.var += (x - m.mean) * (x - m.mean);
    }
    m.var /= n - 1.0;
    m.se_mean = std::sqrt(m.var / n);
    return m;
}

}  // namespace jmtest
