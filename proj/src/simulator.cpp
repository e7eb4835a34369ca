#include "jointmodel/simulator.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>

#include "jointmodel/errors.h"
#include "jointmodel/io.h"
#include "jointmodel/model_eval.h"

namespace jointmodel
{

std::map<int, std::size_t> SimDesign::group_sizes() const
{
    std::map<int, std::size_t> out;
    for (int g : groups)
    {
        ++out[g];
    }
    return out;
}

void SimDesign::validate() const
{
    if (ids.size() != groups.size() || ids.size() != times.size())
    {
        throw InvalidParameter("design ids, groups and times differ in length");
    }
    for (std::size_t i = 0; i < times.size(); ++i)
    {
        if (times[i].size() == 0)
        {
            throw InvalidParameter("design individual " + ids[i] + " has no observation times");
        }
        for (Eigen::Index j = 1; j < times[i].size(); ++j)
        {
            if (!(times[i][j] > times[i][j - 1]))
            {
                throw InvalidParameter("design times must be strictly increasing for " + ids[i]);
            }
        }
    }
    if (truth.mu_x.size() == 0 || truth.sigma_x.rows() != truth.mu_x.size())
    {
        throw InvalidParameter("design truth needs mu_x and a matching sigma_x");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(truth.sigma_x);
    if (eig.eigenvalues().minCoeff() < 0.0)
    {
        throw InvalidParameter("design truth sigma_x must be positive semi-definite");
    }
    if (!(truth.sigma2_eps >= 0.0))
    {
        throw InvalidParameter("design truth sigma2_eps must be non-negative");
    }
    if (!(truth.rho >= 0.0 && truth.rho < 1.0))
    {
        throw InvalidParameter("design truth rho must lie in [0, 1)");
    }
}

ParameterState reference_truth()
{
    ParameterState t;
    t.alpha = (VectorXd(2) << 15.0, 7.0).finished();
    t.beta = (VectorXd(2) << -22.0, 5.0).finished();
    t.mu_x = VectorXd::Constant(1, 4.0);
    t.sigma_x = MatrixXd::Constant(1, 1, 0.2);
    t.sigma2_eps = 0.2;
    t.rho = 0.9;
    t.phi = 1.0;
    return t;
}

SimDesign generate_sparse_design(std::uint64_t seed)
{
    constexpr int kNormal = 124;
    constexpr int kAbnormal = 49;
    // 30% / 31% / 33% / 6% of 173 individuals with 1 / 2 / 3 / 4+ visits.
    std::vector<int> counts;
    auto add = [&](int n_obs, int how_many) { counts.insert(counts.end(), how_many, n_obs); };
    add(1, 52);
    add(2, 54);
    add(3, 57);
    add(4, 6);
    add(5, 3);
    add(6, 1);

    Rng rng = make_stream(seed, 11);
    std::shuffle(counts.begin(), counts.end(), rng);

    SimDesign design;
    design.seed = seed;
    design.truth = reference_truth();
    std::vector<int> days(80);
    std::iota(days.begin(), days.end(), 1);
    for (int i = 0; i < kNormal + kAbnormal; ++i)
    {
        char id[16];
        std::snprintf(id, sizeof id, "S%03d", i + 1);
        design.ids.emplace_back(id);
        design.groups.push_back(i < kNormal ? 1 : 0);
        std::shuffle(days.begin(), days.end(), rng);
        std::vector<int> picked(days.begin(), days.begin() + counts[static_cast<std::size_t>(i)]);
        std::sort(picked.begin(), picked.end());
        VectorXd t(static_cast<Eigen::Index>(picked.size()));
        for (std::size_t j = 0; j < picked.size(); ++j)
        {
            t[static_cast<Eigen::Index>(j)] = picked[j];
        }
        design.times.push_back(std::move(t));
    }
    return design;
}

SimDesign load_design(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw IngestionError("cannot open design file " + path.string());
    }
    SimDesign design;
    design.truth = reference_truth();
    std::string line;
    std::size_t line_no = 0;
    bool header = true;
    while (std::getline(in, line))
    {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#')
        {
            continue;
        }
        if (header)
        {
            header = false;
            continue;
        }
        const auto fields = split(line, '\t');
        if (fields.size() != 3)
        {
            throw IngestionError(
                path.string() + ":" + std::to_string(line_no) + ": expected id, group and times");
        }
        design.ids.push_back(trim(fields[0]));
        design.groups.push_back(static_cast<int>(parse_number(fields[1], path.string(), line_no)));
        const auto packed = split(fields[2], ',');
        VectorXd t(static_cast<Eigen::Index>(packed.size()));
        for (std::size_t j = 0; j < packed.size(); ++j)
        {
            t[static_cast<Eigen::Index>(j)] = parse_number(packed[j], path.string(), line_no);
        }
        design.times.push_back(std::move(t));
    }
    design.validate();
    return design;
}

void write_design(const SimDesign& design, const std::filesystem::path& path)
{
    std::ostringstream out;
    out << "id\tgroup\ttimes\n";
    for (std::size_t i = 0; i < design.size(); ++i)
    {
        out << design.ids[i] << '\t' << design.groups[i] << '\t';
        for (Eigen::Index j = 0; j < design.times[i].size(); ++j)
        {
            out << (j ? "," : "") << format_double(design.times[i][j]);
        }
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

namespace
{

// Symmetric square root that tolerates a singular (PSD) covariance.
MatrixXd psd_sqrt(const MatrixXd& cov)
{
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
    const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

std::vector<Individual> simulate_dataset(
    const SimDesign& design,
    Family family,
    const MeanFunction& mean)
{
    design.validate();
    const ParameterState& truth = design.truth;
    const MatrixXd x_root = psd_sqrt(truth.sigma_x);
    const double eps_sd = std::sqrt(truth.sigma2_eps);
    Rng rng = make_stream(design.seed, 21);

    std::vector<Individual> data;
    data.reserve(design.size());
    for (std::size_t i = 0; i < design.size(); ++i)
    {
        Individual ind;
        ind.id = design.ids[i];
        ind.times = design.times[i];
        ind.covariates = VectorXd::Ones(1);
        const VectorXd x = truth.mu_x + x_root * standard_normal_vector(truth.mu_x.size(), rng);
        const CorrelationFactor factor(truth.rho, ind.times, ind.id);
        const VectorXd eps = eps_sd * factor.correlate(standard_normal_vector(ind.times.size(), rng));
        ind.y = mean.value(truth.alpha, x, ind.times) + eps;
        const double eta = linear_predictor(ind, truth.beta, x);
        switch (family)
        {
            case Family::bernoulli:
                ind.outcome = uniform01(rng) < glm_mean(family, eta) ? 1.0 : 0.0;
                break;
            case Family::poisson:
            {
                std::poisson_distribution<long> pois(std::exp(eta));
                ind.outcome = static_cast<double>(pois(rng));
                break;
            }
            case Family::gaussian:
                ind.outcome = eta + std::sqrt(truth.phi) * standard_normal(rng);
                break;
        }
        data.push_back(std::move(ind));
    }
    return data;
}

std::vector<Individual> simulate_nondegenerate(
    const SimDesign& design,
    int* attempts,
    const MeanFunction& mean)
{
    SimDesign trial = design;
    for (int attempt = 1; attempt <= 1000; ++attempt)
    {
        auto data = simulate_dataset(trial, Family::bernoulli, mean);
        const auto ones = std::count_if(data.begin(), data.end(), [](const Individual& ind) {
            return ind.outcome == 1.0;
        });
        if (ones > 0 && static_cast<std::size_t>(ones) < data.size())
        {
            if (attempts)
            {
                *attempts = attempt;
            }
            return data;
        }
        ++trial.seed;
    }
    throw NumericError("could not simulate a dataset with both outcome classes");
}

std::vector<ReportedParameter> reported_parameters(const ParameterState& truth, ErrorModel error_model)
{
    std::vector<ReportedParameter> out;
    out.push_back({"mu_x", "mu_x[1]", truth.mu_x[0]});
    out.push_back({"alpha[1]", "alpha[1]", truth.alpha[0]});
    out.push_back({"alpha[2]", "alpha[2]", truth.alpha[1]});
    out.push_back({"sigma2_eps", "sigma2_eps", truth.sigma2_eps});
    out.push_back({"sigma2_x", "sigma_x[1;1]", truth.sigma_x(0, 0)});
    if (error_model == ErrorModel::car1)
    {
        out.push_back({"rho", "rho", truth.rho});
    }
    for (Eigen::Index j = 0; j < truth.beta.size(); ++j)
    {
        const std::string name = "beta[" + std::to_string(j + 1) + "]";
        out.push_back({name, name, truth.beta[j]});
    }
    return out;
}

namespace
{

VariantEstimate fit_variant(
    const std::vector<Individual>& data,
    const ModelVariant& variant,
    std::size_t rep)
{
    VariantEstimate est;
    try
    {
        FitConfig config = variant.config;
        config.seed = make_stream(variant.config.seed, 41, rep)();
        const ChainStore chain = run_chain(data, config);
        for (const auto& s : summary_table(chain))
        {
            est.params[s.name] = s;
        }
        const ModelSpec spec = model_spec(config);
        const CpoReport cpo = cpo_report(data, chain, spec);
        est.lpml_sum = cpo.lpml_sum;
        est.lpml_mean = cpo.lpml_mean;
        if (config.family == Family::bernoulli)
        {
            const auto probs = predict_outcome_probs(data, chain);
            std::vector<double> labels;
            labels.reserve(data.size());
            for (const auto& ind : data)
            {
                labels.push_back(ind.outcome);
            }
            const auto report = evaluate_classifier(probs, labels);
            est.auc = report.auc;
            est.error_rate = report.error_rate;
        }
        est.ok = true;
    }
    catch (const std::exception& e)
    {
        est.ok = false;
        est.error = e.what();
    }
    return est;
}

double sample_sd(const std::vector<double>& v, double mean)
{
    if (v.size() < 2)
    {
        return 0.0;
    }
    double ss = 0.0;
    for (double x : v)
    {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

ReplicationReport aggregate(
    const std::vector<ReplicateRecord>& records,
    std::size_t variant_index,
    const ModelVariant& variant,
    const ParameterState& truth)
{
    ReplicationReport report;
    report.variant = variant.name;
    report.replicates = records.size();
    std::vector<const VariantEstimate*> ok;
    for (const auto& rec : records)
    {
        const auto& est = rec.variants[variant_index];
        if (est.ok)
        {
            ok.push_back(&est);
        }
    }
    report.failures = records.size() - ok.size();
    if (ok.empty())
    {
        return report;
    }
    const double n = static_cast<double>(ok.size());
    for (const auto& param : reported_parameters(truth, variant.config.error_model))
    {
        ParameterAggregate agg;
        agg.name = param.label;
        agg.truth = param.truth;
        std::vector<double> means;
        std::vector<double> medians;
        double covered = 0.0;
        for (const auto* est : ok)
        {
            const auto it = est->params.find(param.chain);
            if (it == est->params.end())
            {
                continue;
            }
            means.push_back(it->second.mean);
            medians.push_back(it->second.median);
            covered += (it->second.q025 <= param.truth && param.truth <= it->second.q975) ? 1.0 : 0.0;
        }
        if (means.empty())
        {
            continue;
        }
        const double k = static_cast<double>(means.size());
        agg.mean = std::accumulate(means.begin(), means.end(), 0.0) / k;
        agg.sd_mean = sample_sd(means, agg.mean);
        agg.median = std::accumulate(medians.begin(), medians.end(), 0.0) / k;
        agg.sd_median = sample_sd(medians, agg.median);
        agg.coverage = covered / k;
        report.params.push_back(agg);
    }
    for (const auto* est : ok)
    {
        report.mean_lpml_sum += est->lpml_sum / n;
        report.mean_auc += est->auc / n;
        report.mean_error_rate += est->error_rate / n;
    }
    return report;
}

}  // namespace

ReplicationResult run_replication_study(
    const SimDesign& design,
    std::size_t n_reps,
    const std::vector<ModelVariant>& variants,
    unsigned workers)
{
    if (n_reps < 1)
    {
        throw InvalidParameter("replication study needs at least one replicate");
    }
    design.validate();
    ReplicationResult result;
    result.records.resize(n_reps);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t rep = next++; rep < n_reps; rep = next++)
        {
            ReplicateRecord& rec = result.records[rep];
            rec.index = rep;
            SimDesign replicate = design;
            replicate.seed = make_stream(design.seed, 31, rep)();
            rec.data_seed = replicate.seed;
            std::vector<Individual> data;
            try
            {
                data = simulate_nondegenerate(replicate);
            }
            catch (const std::exception& e)
            {
                rec.variants.assign(variants.size(), VariantEstimate{false, e.what(), {}, 0, 0, 0, 0});
                continue;
            }
            for (const auto& variant : variants)
            {
                rec.variants.push_back(fit_variant(data, variant, rep));
            }
        }
    };

    if (workers == 0)
    {
        workers = std::max(1u, std::thread::hardware_concurrency());
    }
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_reps));
    if (workers <= 1)
    {
        worker();
    }
    else
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
        {
            pool.emplace_back(worker);
        }
    }

    for (std::size_t v = 0; v < variants.size(); ++v)
    {
        result.reports.push_back(aggregate(result.records, v, variants[v], design.truth));
    }
    return result;
}

}  // namespace jointmodel
