#include "jointmodel/diagnostics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jointmodel/errors.h"

namespace jointmodel
{

double batch_means_variance_of_mean(const double* values, std::size_t n)
{
    const auto batch = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    if (batch < 1 || n < 2 || batch >= n)
    {
        throw InvalidParameter("window too short for batch means");
    }
    const double mean = std::accumulate(values, values + n, 0.0) / static_cast<double>(n);
    double window = std::accumulate(values, values + batch, 0.0);
    double ss = 0.0;
    const std::size_t batches = n - batch + 1;
    for (std::size_t j = 0; j < batches; ++j)
    {
        if (j > 0)
        {
            window += values[j + batch - 1] - values[j - 1];
        }
        const double d = window / static_cast<double>(batch) - mean;
        ss += d * d;
    }
    const double b = static_cast<double>(batch);
    const double nn = static_cast<double>(n);
    // Overlapping batch means estimate of the spectral density at zero.
    const double spectral = nn * b * ss / ((nn - b) * (nn - b + 1.0));
    return spectral / nn;
}

double geweke_z(const ScalarChain& chain, double frac_a, double frac_b)
{
    const std::size_t n = chain.values.size();
    if (n < 100)
    {
        throw InvalidParameter("Geweke diagnostic needs at least 100 draws for " + chain.name);
    }
    if (!(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0))
    {
        throw InvalidParameter("Geweke window fractions must be positive and sum to at most 1");
    }
    const auto n_a = static_cast<std::size_t>(std::floor(frac_a * static_cast<double>(n)));
    const auto n_b = static_cast<std::size_t>(std::floor(frac_b * static_cast<double>(n)));
    const double* first = chain.values.data();
    const double* last = chain.values.data() + (n - n_b);

    auto window_mean = [](const double* v, std::size_t len) {
        return std::accumulate(v, v + len, 0.0) / static_cast<double>(len);
    };
    const double var_a = batch_means_variance_of_mean(first, n_a);
    const double var_b = batch_means_variance_of_mean(last, n_b);
    if (!(var_a > 0.0) || !(var_b > 0.0))
    {
        throw DegenerateChain("zero variance in a Geweke window for " + chain.name);
    }
    return (window_mean(first, n_a) - window_mean(last, n_b)) / std::sqrt(var_a + var_b);
}

double quantile_sorted(const std::vector<double>& sorted, double p)
{
    if (sorted.empty())
    {
        throw InvalidParameter("quantile of an empty sample");
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PosteriorSummary summarize(const ScalarChain& chain)
{
    const auto& v = chain.values;
    if (v.size() < 2)
    {
        throw InvalidParameter("summary needs at least two draws for " + chain.name);
    }
    PosteriorSummary out;
    out.name = chain.name;
    const double n = static_cast<double>(v.size());
    out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v)
    {
        ss += (x - out.mean) * (x - out.mean);
    }
    out.sd = std::sqrt(ss / (n - 1.0));
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    out.q025 = quantile_sorted(sorted, 0.025);
    out.median = quantile_sorted(sorted, 0.5);
    out.q975 = quantile_sorted(sorted, 0.975);
    return out;
}

std::vector<std::string> scalar_parameter_names(const ParameterState& like, const FitConfig& config)
{
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < like.alpha.size(); ++j)
    {
        names.push_back("alpha[" + std::to_string(j + 1) + "]");
    }
    for (Eigen::Index j = 0; j < like.beta.size(); ++j)
    {
        names.push_back("beta[" + std::to_string(j + 1) + "]");
    }
    for (Eigen::Index j = 0; j < like.mu_x.size(); ++j)
    {
        names.push_back("mu_x[" + std::to_string(j + 1) + "]");
    }
    for (Eigen::Index a = 0; a < like.sigma_x.rows(); ++a)
    {
        for (Eigen::Index b = a; b < like.sigma_x.cols(); ++b)
        {
            names.push_back("sigma_x[" + std::to_string(a + 1) + ";" + std::to_string(b + 1) + "]");
        }
    }
    names.push_back("sigma2_eps");
    if (config.error_model == ErrorModel::car1)
    {
        names.push_back("rho");
    }
    if (!has_fixed_dispersion(config.family))
    {
        names.push_back("phi");
    }
    return names;
}

namespace
{

std::vector<double> flatten(const ParameterState& s, const FitConfig& config)
{
    std::vector<double> out;
    out.insert(out.end(), s.alpha.data(), s.alpha.data() + s.alpha.size());
    out.insert(out.end(), s.beta.data(), s.beta.data() + s.beta.size());
    out.insert(out.end(), s.mu_x.data(), s.mu_x.data() + s.mu_x.size());
    for (Eigen::Index a = 0; a < s.sigma_x.rows(); ++a)
    {
        for (Eigen::Index b = a; b < s.sigma_x.cols(); ++b)
        {
            out.push_back(s.sigma_x(a, b));
        }
    }
    out.push_back(s.sigma2_eps);
    if (config.error_model == ErrorModel::car1)
    {
        out.push_back(s.rho);
    }
    if (!has_fixed_dispersion(config.family))
    {
        out.push_back(s.phi);
    }
    return out;
}

}  // namespace

std::vector<ScalarChain> scalar_chains(const ChainStore& store)
{
    if (store.draws.empty())
    {
        return {};
    }
    const auto names = scalar_parameter_names(store.draws.front(), store.meta.config);
    std::vector<ScalarChain> chains(names.size());
    for (std::size_t k = 0; k < names.size(); ++k)
    {
        chains[k].name = names[k];
        chains[k].values.reserve(store.draws.size());
    }
    for (const auto& draw : store.draws)
    {
        const auto flat = flatten(draw, store.meta.config);
        for (std::size_t k = 0; k < flat.size(); ++k)
        {
            chains[k].values.push_back(flat[k]);
        }
    }
    return chains;
}

std::vector<GewekeRow> geweke_report(const ChainStore& store, double frac_a, double frac_b)
{
    std::vector<GewekeRow> rows;
    for (const auto& chain : scalar_chains(store))
    {
        GewekeRow row;
        row.name = chain.name;
        try
        {
            row.z = geweke_z(chain, frac_a, frac_b);
            row.pass_strict = std::abs(row.z) < kGewekeStrictThreshold;
            row.pass = std::abs(row.z) < kGewekeThreshold;
        }
        catch (const Error& e)
        {
            row.z = std::nan("");
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<PosteriorSummary> summary_table(const ChainStore& store)
{
    std::vector<PosteriorSummary> rows;
    for (const auto& chain : scalar_chains(store))
    {
        rows.push_back(summarize(chain));
    }
    return rows;
}

}  // namespace jointmodel
