#include "jointmodel/types.h"

#include <cmath>

#include <Eigen/Cholesky>

#include "jointmodel/errors.h"

namespace jointmodel
{

void validate(const Individual& ind)
{
    if (ind.id.empty())
    {
        throw DataError("individual with empty id");
    }
    if (ind.times.size() == 0 || ind.times.size() != ind.y.size())
    {
        throw DataError(
            "individual " + ind.id + ": times and y must have the same nonzero length");
    }
    if (!ind.times.allFinite() || !ind.y.allFinite())
    {
        throw DataError("individual " + ind.id + ": non-finite time or measurement");
    }
    for (Eigen::Index j = 1; j < ind.times.size(); ++j)
    {
        if (!(ind.times[j] > ind.times[j - 1]))
        {
            throw DataError("individual " + ind.id + ": times must be strictly increasing");
        }
    }
    if (ind.covariates.size() < 1)
    {
        throw DataError("individual " + ind.id + ": covariate vector must include the intercept");
    }
}

std::string_view to_string(ErrorModel model)
{
    return model == ErrorModel::car1 ? "car1" : "independent";
}

std::string_view to_string(Family family)
{
    switch (family)
    {
        case Family::bernoulli:
            return "bernoulli";
        case Family::poisson:
            return "poisson";
        case Family::gaussian:
            return "gaussian";
    }
    return "unknown";
}

ErrorModel parse_error_model(std::string_view text)
{
    if (text == "car1")
    {
        return ErrorModel::car1;
    }
    if (text == "independent")
    {
        return ErrorModel::independent;
    }
    throw ConfigError("unknown error model '" + std::string(text) + "'");
}

Family parse_family(std::string_view text)
{
    if (text == "bernoulli")
    {
        return Family::bernoulli;
    }
    if (text == "poisson")
    {
        return Family::poisson;
    }
    if (text == "gaussian")
    {
        return Family::gaussian;
    }
    throw ConfigError("unknown GLM family '" + std::string(text) + "'");
}

namespace
{

bool is_spd(const MatrixXd& m)
{
    if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite())
    {
        return false;
    }
    if (!m.isApprox(m.transpose(), 1e-10))
    {
        return false;
    }
    Eigen::LLT<MatrixXd> llt(m);
    return llt.info() == Eigen::Success;
}

}  // namespace

void validate(const ParameterState& state)
{
    if (!is_spd(state.sigma_x))
    {
        throw InvalidParameter("sigma_x must be symmetric positive definite");
    }
    if (state.sigma_x.rows() != state.mu_x.size())
    {
        throw InvalidParameter("sigma_x and mu_x dimensions differ");
    }
    if (!(state.sigma2_eps > 0.0) || !std::isfinite(state.sigma2_eps))
    {
        throw InvalidParameter("sigma2_eps must be positive");
    }
    if (!(state.rho >= 0.0 && state.rho < 1.0))
    {
        throw InvalidParameter("rho must lie in [0, 1)");
    }
    if (!(state.phi > 0.0) || !std::isfinite(state.phi))
    {
        throw InvalidParameter("phi must be positive");
    }
    for (const auto& xi : state.x)
    {
        if (xi.size() != state.mu_x.size() || !xi.allFinite())
        {
            throw InvalidParameter("random effect with wrong dimension or non-finite value");
        }
    }
}

Hyperparameters Hyperparameters::defaults()
{
    Hyperparameters h;
    h.a1 = VectorXd::Zero(2);
    h.A = 1000.0 * MatrixXd::Identity(2, 2);
    h.c1 = VectorXd::Zero(1);
    h.C = MatrixXd::Constant(1, 1, 1000.0);
    h.v = 6.0;
    h.V = MatrixXd::Constant(1, 1, 0.00083);
    h.sigma2_eps_prior = {3.0, 0.01};
    h.s = VectorXd::Zero(1);
    h.S = MatrixXd::Constant(1, 1, 1000.0);
    h.phi_prior = {3.0, 0.01};
    return h;
}

namespace
{

VectorXd resolve_vector(const VectorXd& v, Eigen::Index n, const char* name)
{
    if (v.size() == n)
    {
        return v;
    }
    if (v.size() == 1)
    {
        return VectorXd::Constant(n, v[0]);
    }
    throw ConfigError(
        std::string("hyperparameter ") + name + " has length " + std::to_string(v.size())
        + ", expected " + std::to_string(n));
}

MatrixXd resolve_matrix(const MatrixXd& m, Eigen::Index n, const char* name)
{
    if (m.rows() == n && m.cols() == n)
    {
        return m;
    }
    if (m.rows() == 1 && m.cols() == 1)
    {
        return m(0, 0) * MatrixXd::Identity(n, n);
    }
    throw ConfigError(
        std::string("hyperparameter ") + name + " has shape " + std::to_string(m.rows()) + "x"
        + std::to_string(m.cols()) + ", expected " + std::to_string(n) + "x" + std::to_string(n));
}

}  // namespace

Hyperparameters Hyperparameters::resolved(Eigen::Index p, Eigen::Index q, Eigen::Index r) const
{
    Hyperparameters h = *this;
    h.a1 = resolve_vector(a1, p, "a1");
    h.A = resolve_matrix(A, p, "A");
    h.c1 = resolve_vector(c1, q, "c1");
    h.C = resolve_matrix(C, q, "C");
    h.V = resolve_matrix(V, q, "V");
    h.s = resolve_vector(s, r, "s");
    h.S = resolve_matrix(S, r, "S");
    h.validate(p, q, r);
    return h;
}

void Hyperparameters::validate(Eigen::Index p, Eigen::Index q, Eigen::Index r) const
{
    auto check_pd = [](const MatrixXd& m, const char* name) {
        if (!is_spd(m))
        {
            throw ConfigError(std::string("hyperparameter ") + name + " must be positive definite");
        }
    };
    if (a1.size() != p || c1.size() != q || s.size() != r)
    {
        throw ConfigError("hyperparameter vector dimensions do not match the model");
    }
    check_pd(A, "A");
    check_pd(C, "C");
    check_pd(V, "V");
    check_pd(S, "S");
    if (!(v > static_cast<double>(q) - 1.0))
    {
        throw ConfigError("hyperparameter v must exceed q - 1");
    }
    if (!(sigma2_eps_prior.shape > 0.0 && sigma2_eps_prior.rate > 0.0))
    {
        throw ConfigError("hyperparameters v1, v2 must be positive");
    }
    if (!(phi_prior.shape > 0.0 && phi_prior.rate > 0.0))
    {
        throw ConfigError("hyperparameters r1, r2 must be positive");
    }
    if (!(rho_lower >= 0.0 && rho_upper <= 1.0 && rho_lower < rho_upper))
    {
        throw ConfigError("rho prior bounds must satisfy 0 <= rho_lower < rho_upper <= 1");
    }
}

}  // namespace jointmodel
