#include "jointmodel/model_eval.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jointmodel/errors.h"

namespace jointmodel
{

double individual_log_density(
    const Individual& ind,
    std::size_t index,
    const ParameterState& draw,
    const ModelSpec& spec)
{
    const VectorXd& xi = draw.x.at(index);
    const CorrelationFactor factor(draw.rho, ind.times, ind.id);
    double ll = longit_loglik(ind, draw.alpha, xi, draw.sigma2_eps, factor, *spec.mean);
    ll += glm_logpdf(spec.family, ind.outcome, linear_predictor(ind, draw.beta, xi), draw.phi);
    ll += random_effect_logpdf(xi, draw);
    return ll;
}

double log_cpo_hat(
    const Individual& ind,
    std::size_t index,
    const ChainStore& draws,
    const ModelSpec& spec)
{
    const std::size_t r = draws.draws.size();
    if (r == 0)
    {
        throw InvalidParameter("CPO needs at least one retained draw");
    }
    std::vector<double> neg(r);
    for (std::size_t k = 0; k < r; ++k)
    {
        const double ll = individual_log_density(ind, index, draws.draws[k], spec);
        if (!std::isfinite(ll))
        {
            throw NumericError("non-finite density at draw " + std::to_string(k), ind.id);
        }
        neg[k] = -ll;
    }
    const double top = *std::max_element(neg.begin(), neg.end());
    double acc = 0.0;
    for (double v : neg)
    {
        acc += std::exp(v - top);
    }
    const double log_mean_inverse = top + std::log(acc) - std::log(static_cast<double>(r));
    return -log_mean_inverse;
}

double cpo_hat(
    const Individual& ind,
    std::size_t index,
    const ChainStore& draws,
    const ModelSpec& spec)
{
    return std::exp(log_cpo_hat(ind, index, draws, spec));
}

Lpml lpml(std::span<const double> cpos)
{
    Lpml out;
    if (cpos.empty())
    {
        throw DomainError("LPML of an empty CPO set");
    }
    for (double c : cpos)
    {
        if (!(c > 0.0))
        {
            throw DomainError("CPO values must be positive");
        }
        out.sum += std::log(c);
    }
    out.mean = out.sum / static_cast<double>(cpos.size());
    return out;
}

CpoReport cpo_report(
    std::span<const Individual> data,
    const ChainStore& draws,
    const ModelSpec& spec)
{
    CpoReport report;
    report.cpo.reserve(data.size());
    report.log_cpo.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        const double lc = log_cpo_hat(data[i], i, draws, spec);
        report.log_cpo.push_back(lc);
        report.cpo.push_back(std::exp(lc));
        report.lpml_sum += lc;
    }
    if (!data.empty())
    {
        report.lpml_mean = report.lpml_sum / static_cast<double>(data.size());
    }
    return report;
}

double predict_outcome_prob(const Individual& ind, std::size_t index, const ChainStore& draws)
{
    if (draws.meta.config.family != Family::bernoulli)
    {
        throw ConfigError("outcome probabilities need the Bernoulli family");
    }
    if (draws.draws.empty())
    {
        throw InvalidParameter("no retained draws");
    }
    double acc = 0.0;
    for (const auto& draw : draws.draws)
    {
        acc += std::exp(log_sigmoid(linear_predictor(ind, draw.beta, draw.x.at(index))));
    }
    return acc / static_cast<double>(draws.draws.size());
}

std::vector<double> predict_outcome_probs(std::span<const Individual> data, const ChainStore& draws)
{
    std::vector<double> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        out.push_back(predict_outcome_prob(data[i], i, draws));
    }
    return out;
}

namespace
{

void check_labels(std::span<const double> scores, std::span<const double> labels)
{
    if (scores.size() != labels.size())
    {
        throw InvalidParameter("scores and labels differ in length");
    }
    for (double l : labels)
    {
        if (l != 0.0 && l != 1.0)
        {
            throw DataError("class labels must be 0 or 1");
        }
    }
}

}  // namespace

ClassificationReport classify(
    std::span<const double> probs,
    std::span<const double> labels,
    double cutoff)
{
    check_labels(probs, labels);
    ClassificationReport report;
    for (std::size_t i = 0; i < probs.size(); ++i)
    {
        const int actual = labels[i] == 1.0 ? 0 : 1;
        const int predicted = probs[i] >= cutoff ? 0 : 1;
        ++report.confusion[actual][predicted];
    }
    const auto& c = report.confusion;
    const std::int64_t normal = c[0][0] + c[0][1];
    const std::int64_t abnormal = c[1][0] + c[1][1];
    if (normal == 0)
    {
        throw DomainError("sensitivity is undefined: no actual normal cases");
    }
    if (abnormal == 0)
    {
        throw DomainError("specificity is undefined: no actual abnormal cases");
    }
    const auto m = static_cast<double>(normal + abnormal);
    report.error_rate = static_cast<double>(c[0][1] + c[1][0]) / m;
    report.sensitivity = static_cast<double>(c[0][0]) / static_cast<double>(normal);
    report.specificity = static_cast<double>(c[1][1]) / static_cast<double>(abnormal);
    return report;
}

RocAuc roc_auc(std::span<const double> scores, std::span<const double> labels)
{
    check_labels(scores, labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    const double positives = std::count(labels.begin(), labels.end(), 1.0);
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0)
    {
        throw DomainError("ROC analysis needs both classes");
    }

    RocAuc out;
    out.roc.push_back({0.0, 0.0});
    double tp = 0.0;
    double fp = 0.0;
    double pairs = 0.0;
    for (std::size_t start = 0; start < n;)
    {
        std::size_t end = start;
        double group_pos = 0.0;
        double group_neg = 0.0;
        while (end < n && scores[order[end]] == scores[order[start]])
        {
            (labels[order[end]] == 1.0 ? group_pos : group_neg) += 1.0;
            ++end;
        }
        // Positives in this tie group beat every negative already passed
        // and tie with the group's negatives.
        pairs += group_pos * (negatives - fp - group_neg) + 0.5 * group_pos * group_neg;
        tp += group_pos;
        fp += group_neg;
        out.roc.push_back({fp / negatives, tp / positives});
        start = end;
    }
    out.auc = pairs / (positives * negatives);

    const double a = out.auc;
    const double q1 = a / (2.0 - a);
    const double q2 = 2.0 * a * a / (1.0 + a);
    const double var = (a * (1.0 - a) + (positives - 1.0) * (q1 - a * a)
                        + (negatives - 1.0) * (q2 - a * a))
                       / (positives * negatives);
    out.auc_sd = std::sqrt(std::max(0.0, var));
    return out;
}

ClassificationReport evaluate_classifier(
    std::span<const double> probs,
    std::span<const double> labels,
    double cutoff)
{
    ClassificationReport report = classify(probs, labels, cutoff);
    RocAuc roc = roc_auc(probs, labels);
    report.auc = roc.auc;
    report.auc_sd = roc.auc_sd;
    report.roc = std::move(roc.roc);
    return report;
}

}  // namespace jointmodel
