#pragma once

#include <string>
#include <vector>

#include "jointmodel/gibbs.h"

namespace jointmodel
{

struct ScalarChain
{
    std::string name;
    std::vector<double> values;
};

// Mean, SD and 2.5% / 50% / 97.5% quantiles of a marginal posterior.
struct PosteriorSummary
{
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double median = 0.0;
    double q975 = 0.0;
};

// |z| thresholds reported alongside the Geweke statistic.
inline constexpr double kGewekeStrictThreshold = 1.6;
inline constexpr double kGewekeThreshold = 1.96;

// Variance of the sample mean from overlapping batch means with batch
// length floor(sqrt(n)).
double batch_means_variance_of_mean(const double* values, std::size_t n);

// Geweke z comparing the first frac_a and the last frac_b of the chain.
// Throws InvalidParameter for bad fractions or chains shorter than 100,
// DegenerateChain when either window has zero variance.
double geweke_z(const ScalarChain& chain, double frac_a = 0.1, double frac_b = 0.5);

// Empirical quantile with linear interpolation between order statistics
// (position (n - 1) p). `sorted` must be ascending.
double quantile_sorted(const std::vector<double>& sorted, double p);

PosteriorSummary summarize(const ScalarChain& chain);

// Parameter labels of a chain's scalar columns: alpha[j], beta[j],
// mu_x[j], sigma_x[j;k] (upper triangle), sigma2_eps, then rho under car1
// and phi for a free dispersion.
std::vector<std::string> scalar_parameter_names(const ParameterState& like, const FitConfig& config);

// Every scalar parameter of a chain as its own trace.
std::vector<ScalarChain> scalar_chains(const ChainStore& store);

struct GewekeRow
{
    std::string name;
    double z = 0.0;
    bool pass_strict = false;  // |z| < 1.6
    bool pass = false;         // |z| < 1.96
    std::string error;         // non-empty when z could not be computed
};

std::vector<GewekeRow> geweke_report(const ChainStore& store, double frac_a = 0.1, double frac_b = 0.5);

std::vector<PosteriorSummary> summary_table(const ChainStore& store);

}  // namespace jointmodel
