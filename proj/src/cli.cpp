#include "jointmodel/cli.h"

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "jointmodel/diagnostics.h"
#include "jointmodel/errors.h"
#include "jointmodel/io.h"
#include "jointmodel/model_eval.h"
#include "jointmodel/simulator.h"

#ifndef JOINTMODEL_DATA_DIR
#define JOINTMODEL_DATA_DIR "data"
#endif

namespace jointmodel
{

namespace
{

namespace fs = std::filesystem;

const char* const kDefaultDesign = JOINTMODEL_DATA_DIR "/design_173.tsv";

struct Options
{
    std::string config;
    std::string long_path;
    std::string outcomes_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> error_model;
    std::optional<std::int64_t> iterations;
    std::optional<std::int64_t> burn_in;
    std::optional<std::int64_t> thin;
    std::optional<int> threads;
    std::size_t reps = 20;
    double cutoff = 0.5;
    std::string design = kDefaultDesign;
    std::vector<std::string> chains;
    bool skip_bad_rows = false;
};

// Desk-scale schedule used by `replicate` when no configuration file is given.
constexpr std::int64_t kDeskIterations = 50'000;
constexpr std::int64_t kDeskBurnIn = 5'000;
constexpr std::int64_t kDeskThin = 10;

FitConfig load_config(const Options& o, bool desk_scale = false)
{
    FitConfig config = o.config.empty() ? parse_config_text("") : parse_config(o.config);
    if (desk_scale && o.config.empty())
    {
        config.iterations = kDeskIterations;
        config.burn_in = kDeskBurnIn;
        config.thin = kDeskThin;
    }
    if (o.seed)
    {
        config.seed = *o.seed;
    }
    if (o.error_model)
    {
        config.error_model = parse_error_model(*o.error_model);
    }
    if (o.iterations)
    {
        config.iterations = *o.iterations;
    }
    if (o.burn_in)
    {
        config.burn_in = *o.burn_in;
    }
    if (o.thin)
    {
        config.thin = *o.thin;
    }
    if (o.threads)
    {
        config.threads = *o.threads;
    }
    config.validate();
    return config;
}

std::vector<Individual> load_data(const Options& o)
{
    std::vector<std::string> warnings;
    auto data = load_dataset(o.long_path, o.outcomes_path, LoadOptions{o.skip_bad_rows}, &warnings);
    for (const auto& w : warnings)
    {
        std::cerr << "warning: " << w << '\n';
    }
    return data;
}

std::string fmt(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string summary_csv(const std::vector<PosteriorSummary>& rows)
{
    std::string out = "parameter,Mean,SD,2.5%,Median,97.5%\n";
    for (const auto& s : rows)
    {
        out += s.name + "," + format_double(s.mean) + "," + format_double(s.sd) + ","
               + format_double(s.q025) + "," + format_double(s.median) + "," + format_double(s.q975) + "\n";
    }
    return out;
}

void print_summary(const std::vector<PosteriorSummary>& rows)
{
    std::printf("%-14s %10s %10s %10s %10s %10s\n", "parameter", "Mean", "SD", "2.5%", "Median", "97.5%");
    for (const auto& s : rows)
    {
        std::printf(
            "%-14s %10.4f %10.4f %10.4f %10.4f %10.4f\n",
            s.name.c_str(), s.mean, s.sd, s.q025, s.median, s.q975);
    }
}

std::vector<double> outcome_labels(std::span<const Individual> data)
{
    std::vector<double> labels;
    labels.reserve(data.size());
    for (const auto& ind : data)
    {
        labels.push_back(ind.outcome);
    }
    return labels;
}

void check_chain_matches(const ChainStore& chain, std::span<const Individual> data, const std::string& path)
{
    if (chain.meta.ids.size() != data.size())
    {
        throw DataError(path + ": chain has " + std::to_string(chain.meta.ids.size())
                        + " individuals, data has " + std::to_string(data.size()));
    }
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        if (chain.meta.ids[i] != data[i].id)
        {
            throw DataError(path + ": individual " + std::to_string(i + 1) + " is '" + chain.meta.ids[i]
                            + "' in the chain but '" + data[i].id + "' in the data");
        }
    }
}

int run_fit(const Options& o)
{
    const FitConfig config = load_config(o);
    const auto data = load_data(o);
    const ChainStore chain = run_chain(data, config);
    const fs::path dir = o.out_dir;
    persist_chain(chain, dir / "chain.csv");
    const auto summary = summary_table(chain);
    write_file_atomic(dir / "summary.csv", summary_csv(summary));
    std::string acc = "block,proposed,accepted,rate\n";
    for (const auto& [block, t] : chain.meta.acceptance)
    {
        acc += block + "," + std::to_string(t.proposed) + "," + std::to_string(t.accepted) + ","
               + format_double(t.rate()) + "\n";
    }
    write_file_atomic(dir / "acceptance.csv", acc);
    std::printf("%zu individuals, %zu retained draws (%s errors)\n",
                data.size(), chain.size(), std::string(to_string(config.error_model)).c_str());
    print_summary(summary);
    return 0;
}

int run_simulate(const Options& o)
{
    SimDesign design = load_design(o.design);
    if (o.seed)
    {
        design.seed = *o.seed;
    }
    if (o.error_model && parse_error_model(*o.error_model) == ErrorModel::independent)
    {
        design.truth.rho = 0.0;
    }
    int attempts = 0;
    const auto data = simulate_nondegenerate(design, &attempts);
    const fs::path dir = o.out_dir;
    write_dataset(data, dir / "long.csv", dir / "outcomes.csv");
    std::size_t ones = 0;
    for (const auto& ind : data)
    {
        ones += ind.outcome == 1.0 ? 1 : 0;
    }
    std::printf("simulated %zu individuals (%zu with D=1) in %d attempt(s)\n", data.size(), ones, attempts);
    return 0;
}

std::string replication_csv(const ReplicationResult& result)
{
    std::string out = "model,parameter,True Value,Mean,SD_Mean,Median,SD_Median,Coverage Prob.\n";
    for (const auto& r : result.reports)
    {
        for (const auto& p : r.params)
        {
            out += r.variant + "," + p.name + "," + format_double(p.truth) + "," + format_double(p.mean) + ","
                   + format_double(p.sd_mean) + "," + format_double(p.median) + ","
                   + format_double(p.sd_median) + "," + format_double(p.coverage) + "\n";
        }
    }
    return out;
}

std::string replicate_records_csv(const ReplicationResult& result, const std::vector<ModelVariant>& variants)
{
    std::string out = "replicate,data_seed,model,ok,lpml_sum,lpml_mean,auc,error_rate,error\n";
    for (const auto& rec : result.records)
    {
        for (std::size_t v = 0; v < rec.variants.size(); ++v)
        {
            const auto& e = rec.variants[v];
            std::string error = e.error;
            std::replace(error.begin(), error.end(), ',', ';');
            out += std::to_string(rec.index + 1) + "," + std::to_string(rec.data_seed) + "," + variants[v].name
                   + "," + (e.ok ? "1" : "0") + "," + format_double(e.lpml_sum) + "," + format_double(e.lpml_mean)
                   + "," + format_double(e.auc) + "," + format_double(e.error_rate) + "," + error + "\n";
        }
    }
    return out;
}

int run_replicate(const Options& o)
{
    SimDesign design = load_design(o.design);
    Options fit_options = o;
    fit_options.error_model.reset();
    const FitConfig base = load_config(fit_options, true);
    if (o.seed)
    {
        design.seed = *o.seed;
    }
    std::vector<ModelVariant> variants;
    const auto add = [&](ErrorModel em, const char* name) {
        FitConfig c = base;
        c.error_model = em;
        c.threads = 1;
        variants.push_back({name, c});
    };
    if (!o.error_model || parse_error_model(*o.error_model) == ErrorModel::independent)
    {
        add(ErrorModel::independent, "independent");
    }
    if (!o.error_model || parse_error_model(*o.error_model) == ErrorModel::car1)
    {
        add(ErrorModel::car1, "car1");
    }
    const unsigned workers = o.threads ? static_cast<unsigned>(*o.threads) : std::thread::hardware_concurrency();
    const auto result = run_replication_study(design, o.reps, variants, workers);
    const fs::path dir = o.out_dir;
    write_file_atomic(dir / "replication.csv", replication_csv(result));
    write_file_atomic(dir / "replicates.csv", replicate_records_csv(result, variants));

    std::printf("%zu replicates, %lld iterations per fit\n", o.reps, static_cast<long long>(base.iterations));
    for (const auto& r : result.reports)
    {
        std::printf("\n%s errors (%zu failed fits)\n", r.variant.c_str(), r.failures);
        std::printf("%-12s %10s %10s %10s %10s %10s %10s\n",
                    "parameter", "True", "Mean", "SD_Mean", "Median", "SD_Median", "Coverage");
        for (const auto& p : r.params)
        {
            std::printf("%-12s %10.3f %10.3f %10.3f %10.3f %10.3f %10.3f\n", p.name.c_str(), p.truth, p.mean,
                        p.sd_mean, p.median, p.sd_median, p.coverage);
        }
        std::printf("mean LPML (sum) %.3f, mean AUC %.3f, mean error rate %.3f\n",
                    r.mean_lpml_sum, r.mean_auc, r.mean_error_rate);
    }
    return 0;
}

int run_diagnose(const Options& o)
{
    if (o.chains.size() != 1)
    {
        throw ConfigError("diagnose takes exactly one --chain");
    }
    const ChainStore chain = load_chain(o.chains.front());
    const auto rows = geweke_report(chain);
    std::string out = "parameter,z,pass_1.6,pass_1.96,error\n";
    std::printf("%-14s %10s %8s %8s\n", "parameter", "z", "|z|<1.6", "|z|<1.96");
    for (const auto& r : rows)
    {
        out += r.name + "," + (r.error.empty() ? format_double(r.z) : "nan") + "," + (r.pass_strict ? "1" : "0")
               + "," + (r.pass ? "1" : "0") + "," + r.error + "\n";
        if (r.error.empty())
        {
            std::printf("%-14s %10.4f %8s %8s\n", r.name.c_str(), r.z, r.pass_strict ? "yes" : "no",
                        r.pass ? "yes" : "no");
        }
        else
        {
            std::printf("%-14s %10s  %s\n", r.name.c_str(), "n/a", r.error.c_str());
        }
    }
    write_file_atomic(fs::path(o.out_dir) / "geweke.csv", out);
    return 0;
}

int run_compare(const Options& o)
{
    if (o.chains.size() < 2)
    {
        throw ConfigError("compare needs at least two --chain arguments");
    }
    const auto data = load_data(o);
    std::string table = "chain,error_model,LPML_mean,LPML_sum\n";
    std::string cpo = "id";
    std::vector<CpoReport> reports;
    std::printf("%-40s %12s %12s %12s\n", "chain", "error model", "LPML (mean)", "LPML (sum)");
    for (const auto& path : o.chains)
    {
        const ChainStore chain = load_chain(path);
        check_chain_matches(chain, data, path);
        const ModelSpec spec = model_spec(chain.meta.config);
        reports.push_back(cpo_report(data, chain, spec));
        const auto& r = reports.back();
        const std::string em(to_string(chain.meta.config.error_model));
        table += path + "," + em + "," + format_double(r.lpml_mean) + "," + format_double(r.lpml_sum) + "\n";
        cpo += "," + path;
        std::printf("%-40s %12s %12.4f %12.4f\n", path.c_str(), em.c_str(), r.lpml_mean, r.lpml_sum);
    }
    cpo += "\n";
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        cpo += data[i].id;
        for (const auto& r : reports)
        {
            cpo += "," + format_double(r.cpo[i]);
        }
        cpo += "\n";
    }
    const fs::path dir = o.out_dir;
    write_file_atomic(dir / "lpml.csv", table);
    write_file_atomic(dir / "cpo.csv", cpo);
    return 0;
}

int run_classify(const Options& o)
{
    if (o.chains.size() != 1)
    {
        throw ConfigError("classify takes exactly one --chain");
    }
    const auto data = load_data(o);
    const ChainStore chain = load_chain(o.chains.front());
    check_chain_matches(chain, data, o.chains.front());
    const auto probs = predict_outcome_probs(data, chain);
    const auto labels = outcome_labels(data);
    const auto report = evaluate_classifier(probs, labels, o.cutoff);

    const auto& c = report.confusion;
    std::string table = "actual,predicted_normal,predicted_abnormal\n";
    table += "normal," + std::to_string(c[0][0]) + "," + std::to_string(c[0][1]) + "\n";
    table += "abnormal," + std::to_string(c[1][0]) + "," + std::to_string(c[1][1]) + "\n";
    std::string metrics = "metric,value\n";
    metrics += "cutoff," + format_double(o.cutoff) + "\n";
    metrics += "error_rate," + format_double(report.error_rate) + "\n";
    metrics += "sensitivity," + format_double(report.sensitivity) + "\n";
    metrics += "specificity," + format_double(report.specificity) + "\n";
    metrics += "auc," + format_double(report.auc) + "\n";
    metrics += "auc_sd," + format_double(report.auc_sd) + "\n";
    std::string roc = "fpr,tpr\n";
    for (const auto& p : report.roc)
    {
        roc += format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
    }
    std::string pred = "id,outcome,prob_normal,predicted\n";
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        pred += data[i].id + "," + format_double(labels[i]) + "," + format_double(probs[i]) + ","
                + (probs[i] >= o.cutoff ? "1" : "0") + "\n";
    }
    const fs::path dir = o.out_dir;
    write_file_atomic(dir / "confusion.csv", table);
    write_file_atomic(dir / "classification.csv", metrics);
    write_file_atomic(dir / "roc.csv", roc);
    write_file_atomic(dir / "predictions.csv", pred);

    std::printf("%-10s %18s %18s\n", "actual", "predicted normal", "predicted abnormal");
    std::printf("%-10s %18lld %18lld\n", "normal", static_cast<long long>(c[0][0]), static_cast<long long>(c[0][1]));
    std::printf("%-10s %18lld %18lld\n", "abnormal", static_cast<long long>(c[1][0]), static_cast<long long>(c[1][1]));
    std::printf("error rate %s%%, sensitivity %s, specificity %s, AUC %s (SD %s)\n",
                fmt(100.0 * report.error_rate, 1).c_str(), fmt(report.sensitivity, 3).c_str(),
                fmt(report.specificity, 3).c_str(), fmt(report.auc, 3).c_str(), fmt(report.auc_sd, 3).c_str());
    return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv)
{
    CLI::App app{"Bayesian joint model of a nonlinear longitudinal marker and a binary outcome"};
    app.require_subcommand(1, 1);
    Options o;

    const auto add_data = [&](CLI::App* sub) {
        sub->add_option("--long", o.long_path, "longitudinal CSV (id,time,y)")->required();
        sub->add_option("--outcomes", o.outcomes_path, "outcome CSV (id,d[,covariates])")->required();
        sub->add_flag("--skip-bad-rows", o.skip_bad_rows, "skip malformed rows with a warning");
    };
    const auto add_fit = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "key=value configuration file");
        sub->add_option("--seed", o.seed, "random seed");
        sub->add_option("--error-model", o.error_model, "independent or car1")
            ->check(CLI::IsMember({"independent", "car1"}));
        sub->add_option("--iterations", o.iterations, "total sweeps");
        sub->add_option("--burn-in", o.burn_in, "discarded sweeps");
        sub->add_option("--thin", o.thin, "keep every k-th sweep");
        sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    };

    auto* fit = app.add_subcommand("fit", "fit the joint model and write the chain and a posterior summary");
    add_data(fit);
    add_fit(fit);
    fit->add_option("--out-dir", o.out_dir, "output directory");

    auto* simulate = app.add_subcommand("simulate", "simulate a dataset on a sparse design");
    simulate->add_option("--design", o.design, "design file")->check(CLI::ExistingFile);
    simulate->add_option("--seed", o.seed, "random seed");
    simulate->add_option("--error-model", o.error_model, "independent or car1")
        ->check(CLI::IsMember({"independent", "car1"}));
    simulate->add_option("--out-dir", o.out_dir, "output directory");

    auto* replicate = app.add_subcommand("replicate", "bias and coverage study under both error models");
    replicate->add_option("--design", o.design, "design file")->check(CLI::ExistingFile);
    replicate->add_option("--reps", o.reps, "number of simulated datasets")->check(CLI::PositiveNumber);
    add_fit(replicate);
    replicate->add_option("--out-dir", o.out_dir, "output directory");

    auto* diagnose = app.add_subcommand("diagnose", "Geweke convergence diagnostics for a chain");
    diagnose->add_option("--chain", o.chains, "chain CSV")->required();
    diagnose->add_option("--out-dir", o.out_dir, "output directory");

    auto* compare = app.add_subcommand("compare", "CPO and LPML for two or more chains");
    compare->add_option("--chain", o.chains, "chain CSV (repeat)")->required();
    add_data(compare);
    compare->add_option("--out-dir", o.out_dir, "output directory");

    auto* classify = app.add_subcommand("classify", "in-sample classification, ROC and AUC");
    classify->add_option("--chain", o.chains, "chain CSV")->required();
    add_data(classify);
    classify->add_option("--cutoff", o.cutoff, "probability cutoff for predicting normal")
        ->check(CLI::Range(0.0, 1.0));
    classify->add_option("--out-dir", o.out_dir, "output directory");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return 2;
    }

    try
    {
        if (*fit)
        {
            return run_fit(o);
        }
        if (*simulate)
        {
            return run_simulate(o);
        }
        if (*replicate)
        {
            return run_replicate(o);
        }
        if (*diagnose)
        {
            return run_diagnose(o);
        }
        if (*compare)
        {
            return run_compare(o);
        }
        if (*classify)
        {
            return run_classify(o);
        }
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace jointmodel
