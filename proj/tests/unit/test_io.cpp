#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "helpers.h"
#include "jointmodel/cli.h"
#include "jointmodel/errors.h"
#include "jointmodel/gibbs.h"
#include "jointmodel/io.h"
#include "jointmodel/simulator.h"

using namespace jointmodel;
using namespace jmtest;
namespace fs = std::filesystem;

namespace
{

struct TempDir
{
    fs::path path;

    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("jointmodel_test_" + name))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    fs::path file(const std::string& name, const std::string& content) const
    {
        const fs::path p = path / name;
        std::ofstream(p) << content;
        return p;
    }
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "jointmodel");
    std::vector<const char*> argv;
    for (const std::string& a : args)
    {
        argv.push_back(a.c_str());
    }
    return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_SUITE("io")
{
    TEST_CASE("loads one individual from two rows")
    {
        TempDir dir("load");
        const fs::path l = dir.file("l.csv", "id,time,y\nA,1,0.5\nA,2,0.8\n");
        const fs::path o = dir.file("o.csv", "id,d\nA,1\n");
        const std::vector<Individual> data = load_dataset(l, o);
        REQUIRE(data.size() == 1);
        CHECK(data[0].id == "A");
        CHECK(data[0].n_obs() == 2);
        CHECK(data[0].outcome == 1.0);
        CHECK(data[0].covariates == vec({1.0}));
    }

    TEST_CASE("orphan outcome row names the id")
    {
        TempDir dir("orphan");
        const fs::path l = dir.file("l.csv", "id,time,y\nA,1,0.5\n");
        const fs::path o = dir.file("o.csv", "id,d\nA,1\nZ9,0\n");
        try
        {
            load_dataset(l, o);
            FAIL("expected IngestionError");
        }
        catch (const IngestionError& e)
        {
            CHECK(std::string(e.what()).find("Z9") != std::string::npos);
        }
    }

    TEST_CASE("ingestion errors carry row numbers")
    {
        TempDir dir("rows");
        const fs::path o = dir.file("o.csv", "id,d\nA,1\n");
        const fs::path dup = dir.file("d.csv", "id,time,y\nA,1,0.5\nA,1,0.7\n");
        CHECK_THROWS_WITH_AS(load_dataset(dup, o), doctest::Contains(":3"), IngestionError);
        const fs::path bad = dir.file("b.csv", "id,time,y\nA,1,abc\n");
        CHECK_THROWS_WITH_AS(load_dataset(bad, o), doctest::Contains(":2"), IngestionError);

        std::vector<std::string> warnings;
        const fs::path mixed = dir.file("m.csv", "id,time,y\nA,1,abc\nA,2,0.4\n");
        const std::vector<Individual> data = load_dataset(mixed, o, LoadOptions{true}, &warnings);
        CHECK(data[0].n_obs() == 1);
        CHECK(warnings.size() == 1);
    }

    TEST_CASE("row order does not matter")
    {
        TempDir dir("shuffle");
        const fs::path o1 = dir.file("o1.csv", "id,d,w\nA,1,0.3\nB,0,1.5\n");
        const fs::path l1 = dir.file("l1.csv", "id,time,y\nA,1,0.5\nA,2,0.8\nB,4,1.0\nB,9,2.0\n");
        const fs::path o2 = dir.file("o2.csv", "id,d,w\nB,0,1.5\nA,1,0.3\n");
        const fs::path l2 = dir.file("l2.csv", "id,time,y\nB,9,2.0\nA,2,0.8\nB,4,1.0\nA,1,0.5\n");
        const std::vector<Individual> a = load_dataset(l1, o1);
        const std::vector<Individual> b = load_dataset(l2, o2);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            CHECK(a[i].id == b[i].id);
            CHECK(a[i].times == b[i].times);
            CHECK(a[i].y == b[i].y);
            CHECK(a[i].covariates == b[i].covariates);
        }
        CHECK(a[0].covariates == vec({1.0, 0.3}));
    }

    TEST_CASE("dataset round trip")
    {
        TempDir dir("dataset");
        const std::vector<Individual> data = simulate_dataset(generate_sparse_design(3));
        write_dataset(data, dir.path / "l.csv", dir.path / "o.csv");
        const std::vector<Individual> back = load_dataset(dir.path / "l.csv", dir.path / "o.csv");
        REQUIRE(back.size() == data.size());
        for (std::size_t i = 0; i < data.size(); ++i)
        {
            CHECK(back[i].y == data[i].y);
            CHECK(back[i].times == data[i].times);
        }
    }

    TEST_CASE("empty config gives the defaults")
    {
        const FitConfig c = parse_config_text("");
        const FitConfig d;
        CHECK(c.iterations == 2'000'000);
        CHECK(c.burn_in == 10'000);
        CHECK(c.thin == 50);
        CHECK(c.error_model == ErrorModel::car1);
        CHECK(c.hyper.rho_lower == 0.0);
        CHECK(c.hyper.rho_upper == 1.0);
        CHECK(c.hyper.v == d.hyper.v);
        CHECK(c.hyper.sigma2_eps_prior.rate == d.hyper.sigma2_eps_prior.rate);
    }

    TEST_CASE("config keys")
    {
        const FitConfig c = parse_config_text(
            "# schedule\niterations = 500\nburn_in=100\nthin=4\nseed=9\nerror_model=independent\n"
            "A=diag:50,60\nV=0.01\nv2=0.5\nrho_upper=0.95\n");
        CHECK(c.iterations == 500);
        CHECK(c.retained() == 100);
        CHECK(c.seed == 9);
        CHECK(c.error_model == ErrorModel::independent);
        CHECK(c.hyper.A(1, 1) == 60.0);
        CHECK(c.hyper.V(0, 0) == 0.01);
        CHECK(c.hyper.sigma2_eps_prior.rate == 0.5);
        CHECK(c.hyper.rho_upper == 0.95);

        const FitConfig s = parse_config_text("ig_convention=scale\nv2=0.01\n");
        CHECK(s.hyper.sigma2_eps_prior.rate == doctest::Approx(100.0));
    }

    TEST_CASE("config errors name the key")
    {
        CHECK_THROWS_WITH_AS(parse_config_text("thin=0\n"), doctest::Contains("thin"), ConfigError);
        CHECK_THROWS_WITH_AS(parse_config_text("colour=red\n"), doctest::Contains("colour"), ConfigError);
        CHECK_THROWS_AS(parse_config_text("seed=1\nseed=2\n"), ConfigError);
        CHECK_THROWS_AS(parse_config_text("error_model=ar2\n"), ConfigError);
    }

    TEST_CASE("chain round trip is bitwise")
    {
        TempDir dir("chain");
        const std::vector<Individual> data = simulate_dataset(generate_sparse_design(4));
        FitConfig c;
        c.iterations = 40;
        c.burn_in = 10;
        c.thin = 3;
        c.seed = 12;
        const ChainStore store = run_chain(data, c);
        persist_chain(store, dir.path / "chain.csv");
        const ChainStore back = load_chain(dir.path / "chain.csv");
        REQUIRE(back.size() == store.size());
        CHECK(back.iterations == store.iterations);
        CHECK(back.meta.ids == store.meta.ids);
        CHECK(back.meta.config.seed == 12);
        for (std::size_t k = 0; k < store.size(); ++k)
        {
            const ParameterState& a = store.draws[k];
            const ParameterState& b = back.draws[k];
            CHECK(a.alpha == b.alpha);
            CHECK(a.beta == b.beta);
            CHECK(a.mu_x == b.mu_x);
            CHECK(a.sigma_x == b.sigma_x);
            CHECK(a.sigma2_eps == b.sigma2_eps);
            CHECK(a.rho == b.rho);
            for (std::size_t i = 0; i < a.x.size(); ++i)
            {
                CHECK(a.x[i] == b.x[i]);
            }
        }
        const std::string first = slurp(dir.path / "chain.csv");
        persist_chain(back, dir.path / "again.csv");
        CHECK(slurp(dir.path / "again.csv") == first);
    }

    TEST_CASE("truncated chain file is a format error with a line number")
    {
        TempDir dir("trunc");
        const std::vector<Individual> data = simulate_dataset(generate_sparse_design(4));
        FitConfig c;
        c.iterations = 20;
        c.burn_in = 0;
        c.thin = 1;
        persist_chain(run_chain(data, c), dir.path / "chain.csv");
        std::string text = slurp(dir.path / "chain.csv");
        text.resize(text.size() - 30);
        std::ofstream(dir.path / "chain.csv", std::ios::trunc) << text;
        CHECK_THROWS_WITH_AS(load_chain(dir.path / "chain.csv"), doctest::Contains(":21"), FormatError);
    }

    TEST_CASE("retained draws become data rows")
    {
        ChainStore store;
        const ParameterState s = make_state(2);
        store.meta.ids = {"A", "B"};
        for (std::int64_t k = 0; k < 39'800; ++k)
        {
            store.draws.push_back(s);
            store.iterations.push_back(10'000 + 50 * (k + 1));
        }
        TempDir dir("rows39800");
        persist_chain(store, dir.path / "chain.csv");
        std::ifstream in(dir.path / "chain.csv");
        std::string line;
        std::size_t lines = 0;
        while (std::getline(in, line))
        {
            ++lines;
        }
        CHECK(lines == 39'801);
    }

    TEST_CASE("cli pipeline")
    {
        TempDir dir("cli");
        const std::string d = dir.path.string();
        dir.file("fit.cfg", "iterations=300\nburn_in=100\nthin=2\n");
        CHECK(run_cli({"simulate", "--seed", "5", "--out-dir", d + "/data"}) == 0);
        CHECK(fs::exists(dir.path / "data/long.csv"));
        CHECK(run_cli({"fit", "--long", d + "/data/long.csv", "--outcomes", d + "/data/outcomes.csv", "--config",
                       d + "/fit.cfg", "--seed", "2", "--out-dir", d + "/car1"})
              == 0);
        CHECK(run_cli({"fit", "--long", d + "/data/long.csv", "--outcomes", d + "/data/outcomes.csv", "--config",
                       d + "/fit.cfg", "--error-model", "independent", "--out-dir", d + "/ind"})
              == 0);
        CHECK(run_cli({"diagnose", "--chain", d + "/car1/chain.csv", "--out-dir", d + "/diag"}) == 0);
        CHECK(run_cli({"classify", "--chain", d + "/car1/chain.csv", "--long", d + "/data/long.csv", "--outcomes",
                       d + "/data/outcomes.csv", "--out-dir", d + "/cls"})
              == 0);
        CHECK(run_cli({"compare", "--chain", d + "/car1/chain.csv", "--chain", d + "/ind/chain.csv", "--long",
                       d + "/data/long.csv", "--outcomes", d + "/data/outcomes.csv", "--out-dir", d + "/cmp"})
              == 0);
        const std::string lpml = slurp(dir.path / "cmp/lpml.csv");
        CHECK(lpml.find("LPML_mean") != std::string::npos);
        CHECK(lpml.find("LPML_sum") != std::string::npos);
        CHECK(slurp(dir.path / "car1/summary.csv").rfind("parameter,Mean,SD,2.5%,Median,97.5%", 0) == 0);
    }

    TEST_CASE("cli usage errors")
    {
        CHECK(run_cli({"bogus"}) == 2);
        CHECK(run_cli({"fit", "--no-such-flag"}) == 2);
        CHECK(run_cli({"diagnose", "--chain", "/nonexistent/chain.csv"}) == 1);
    }
}
