#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jointmodel/diagnostics.h"
#include "jointmodel/gibbs.h"

namespace jointmodel
{

// Sparse observation design plus the parameter values data are drawn from.
// truth.x is ignored; zero variances are allowed (noiseless data).
struct SimDesign
{
    std::vector<std::string> ids;
    std::vector<int> groups;
    std::vector<VectorXd> times;
    ParameterState truth;
    std::uint64_t seed = 1;

    std::size_t size() const { return ids.size(); }
    std::map<int, std::size_t> group_sizes() const;
    void validate() const;
};

// mu_x = 4, alpha = (15, 7), beta = (-22, 5), sigma2_x = 0.2,
// sigma2_eps = 0.2, rho = 0.9.
ParameterState reference_truth();

// Synthetic stand-in for the real sparse design: 124 + 49 individuals with
// 30% / 31% / 33% / 6% having one / two / three / four-plus observations at
// distinct integer days drawn uniformly from [1, 80].
SimDesign generate_sparse_design(std::uint64_t seed);

// Tab-separated: id, group, comma-packed times; one header line.
SimDesign load_design(const std::filesystem::path& path);
void write_design(const SimDesign& design, const std::filesystem::path& path);

// X_i ~ N(mu_x, Sigma_X); y_i = g(alpha, X_i; t_i) + eps_i with CAR(1)
// errors; D_i from the GLM. Bitwise deterministic in (design, seed).
std::vector<Individual> simulate_dataset(
    const SimDesign& design,
    Family family = Family::bernoulli,
    const MeanFunction& mean = *default_mean_function());

// Redraws with seed + 1, seed + 2, ... until both outcome classes occur.
// `attempts` receives the number of draws used.
std::vector<Individual> simulate_nondegenerate(
    const SimDesign& design,
    int* attempts = nullptr,
    const MeanFunction& mean = *default_mean_function());

struct ModelVariant
{
    std::string name;
    FitConfig config;
};

// Per-replicate posterior summaries of one variant.
struct VariantEstimate
{
    bool ok = false;
    std::string error;
    std::map<std::string, PosteriorSummary> params;
    double lpml_sum = 0.0;
    double lpml_mean = 0.0;
    double auc = 0.0;
    double error_rate = 0.0;
};

struct ReplicateRecord
{
    std::size_t index = 0;
    std::uint64_t data_seed = 0;
    std::vector<VariantEstimate> variants;  // same order as the variants passed in
};

struct ParameterAggregate
{
    std::string name;
    double truth = 0.0;
    double mean = 0.0;       // mean of posterior means
    double sd_mean = 0.0;    // SD of posterior means
    double median = 0.0;     // mean of posterior medians
    double sd_median = 0.0;  // SD of posterior medians
    double coverage = 0.0;   // fraction of 95% intervals containing the truth
};

struct ReplicationReport
{
    std::string variant;
    std::size_t replicates = 0;
    std::size_t failures = 0;
    std::vector<ParameterAggregate> params;
    double mean_lpml_sum = 0.0;
    double mean_auc = 0.0;
    double mean_error_rate = 0.0;
};

struct ReplicationResult
{
    std::vector<ReplicationReport> reports;  // one per variant
    std::vector<ReplicateRecord> records;
};

// Parameter labels reported for the reference model, matching the
// simulation table: mu_x, alpha[1], alpha[2], sigma2_eps, sigma2_x, rho,
// beta[1], beta[2].
struct ReportedParameter
{
    std::string label;  // as printed in the report
    std::string chain;  // scalar chain name
    double truth = 0.0;
};

std::vector<ReportedParameter> reported_parameters(const ParameterState& truth, ErrorModel error_model);

// Simulates n_reps datasets and fits every variant to each. Replicates run
// on up to `workers` threads; aggregation is by replicate index so the
// result does not depend on scheduling. Failed fits are counted, not fatal.
ReplicationResult run_replication_study(
    const SimDesign& design,
    std::size_t n_reps,
    const std::vector<ModelVariant>& variants,
    unsigned workers = 0);

}  // namespace jointmodel
