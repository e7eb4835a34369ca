#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace jointmodel
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

// One subject: sparse longitudinal record plus the primary outcome.
struct Individual
{
    std::string id;
    VectorXd times;       // strictly increasing
    VectorXd y;           // same length as times
    double outcome = 0.0; // D_i
    VectorXd covariates;  // W_i, first entry is the intercept 1

    Eigen::Index n_obs() const { return times.size(); }
};

// Throws DataError when the record violates its invariants.
void validate(const Individual& ind);

enum class ErrorModel
{
    independent,
    car1,
};

enum class Family
{
    bernoulli,
    poisson,
    gaussian,
};

std::string_view to_string(ErrorModel model);
std::string_view to_string(Family family);
ErrorModel parse_error_model(std::string_view text);
Family parse_family(std::string_view text);

// Families with phi fixed at 1.
inline bool has_fixed_dispersion(Family family)
{
    return family != Family::gaussian;
}

// Inverse gamma stored as (shape, rate): density ∝ x^{-shape-1} exp(-rate / x).
struct InverseGamma
{
    double shape = 1.0;
    double rate = 1.0;

    double mean() const { return rate / (shape - 1.0); }
    double variance() const
    {
        return rate * rate / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0));
    }
};

// IG(h, l) in the scale convention whose mean is 1 / ((h - 1) l), i.e. l is
// an inverse rate.
inline InverseGamma inverse_gamma_from_scale(double h, double l)
{
    return {h, 1.0 / l};
}

// One point of the joint parameter space.
struct ParameterState
{
    VectorXd alpha;           // fixed effects of the mean curve
    VectorXd beta;            // (beta_0 over W, beta_1 over X)
    VectorXd mu_x;            // random-effect mean
    MatrixXd sigma_x;         // random-effect covariance
    double sigma2_eps = 1.0;  // measurement-error variance
    double rho = 0.0;         // CAR(1) correlation; stays 0 under independent errors
    double phi = 1.0;         // GLM dispersion
    std::vector<VectorXd> x;  // one random-effect vector per individual

    Eigen::Index q() const { return mu_x.size(); }
};

// Throws InvalidParameter naming the first violated invariant.
void validate(const ParameterState& state);

// Prior constants. Inverse-gamma priors are held in (shape, rate) form;
// conversion from the (v1, v2) scale convention happens in config parsing.
struct Hyperparameters
{
    VectorXd a1;  // alpha ~ N(a1, A)
    MatrixXd A;
    VectorXd c1;  // mu_x ~ N(c1, C)
    MatrixXd C;
    double v = 6.0;  // Sigma_X ~ IW(v, v V)
    MatrixXd V;
    InverseGamma sigma2_eps_prior;
    VectorXd s;  // beta ~ N(s, S)
    MatrixXd S;
    InverseGamma phi_prior;  // Gaussian outcome only
    double rho_lower = 0.0;  // rho ~ U(rho_lower, rho_upper)
    double rho_upper = 1.0;

    // Defaults used in the beta-HCG application: p = 2, q = 1, r = 2.
    static Hyperparameters defaults();

    // Expands scalar placeholders (1x1 matrices, length-1 vectors) to the
    // model dimensions; throws ConfigError on any other mismatch.
    Hyperparameters resolved(Eigen::Index p, Eigen::Index q, Eigen::Index r) const;

    void validate(Eigen::Index p, Eigen::Index q, Eigen::Index r) const;
};

}  // namespace jointmodel
