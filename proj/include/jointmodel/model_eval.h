#pragma once

#include <array>
#include <span>
#include <vector>

#include "jointmodel/gibbs.h"

namespace jointmodel
{

struct CpoReport
{
    std::vector<double> cpo;
    std::vector<double> log_cpo;
    double lpml_mean = 0.0;  // (1/m) sum log CPO_i
    double lpml_sum = 0.0;   // sum log CPO_i
};

struct RocPoint
{
    double fpr = 0.0;
    double tpr = 0.0;
};

// Rows: actual normal (label 1), actual abnormal (label 0).
// Columns: predicted normal, predicted abnormal.
struct ClassificationReport
{
    std::array<std::array<std::int64_t, 2>, 2> confusion{};
    double error_rate = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double auc = 0.0;
    double auc_sd = 0.0;
    std::vector<RocPoint> roc;
};

// Log of f(y_i | x_i, theta) f(D_i | x_i, theta) f(x_i | theta) at one draw.
double individual_log_density(
    const Individual& ind,
    std::size_t index,
    const ParameterState& draw,
    const ModelSpec& spec);

// log CPO_i: harmonic mean of the per-draw densities, by log-sum-exp.
// Throws NumericError naming the draw index on a non-finite density.
double log_cpo_hat(
    const Individual& ind,
    std::size_t index,
    const ChainStore& draws,
    const ModelSpec& spec);

double cpo_hat(
    const Individual& ind,
    std::size_t index,
    const ChainStore& draws,
    const ModelSpec& spec);

struct Lpml
{
    double mean = 0.0;
    double sum = 0.0;
};

// Throws DomainError for a non-positive CPO.
Lpml lpml(std::span<const double> cpos);

// CPO for every individual plus both LPML normalizations. Uses the log
// CPO directly so tiny CPO values do not underflow.
CpoReport cpo_report(
    std::span<const Individual> data,
    const ChainStore& draws,
    const ModelSpec& spec);

// Posterior mean of P(D_i = 1 | x_i) under the Bernoulli-logit model.
double predict_outcome_prob(const Individual& ind, std::size_t index, const ChainStore& draws);

std::vector<double> predict_outcome_probs(std::span<const Individual> data, const ChainStore& draws);

// Predicted normal iff prob >= cutoff. Throws DomainError when a rate is
// undefined because one class is empty.
ClassificationReport classify(
    std::span<const double> probs,
    std::span<const double> labels,
    double cutoff = 0.5);

struct RocAuc
{
    double auc = 0.0;
    double auc_sd = 0.0;  // Hanley-McNeil approximation
    std::vector<RocPoint> roc;
};

// Mann-Whitney AUC with ties counted 1/2, label 1 as the positive class.
RocAuc roc_auc(std::span<const double> scores, std::span<const double> labels);

// classify() plus roc_auc() in one report.
ClassificationReport evaluate_classifier(
    std::span<const double> probs,
    std::span<const double> labels,
    double cutoff = 0.5);

}  // namespace jointmodel
