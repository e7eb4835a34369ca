#include <cmath>

#include <doctest.h>

#include "helpers.h"
#include "jointmodel/errors.h"
#include "jointmodel/gibbs.h"
#include "jointmodel/likelihood.h"
#include "jointmodel/model_eval.h"

using namespace jointmodel;
using namespace jmtest;

namespace
{

ChainStore store_of(std::vector<ParameterState> draws)
{
    ChainStore store;
    for (std::size_t k = 0; k < draws.size(); ++k)
    {
        store.iterations.push_back(static_cast<std::int64_t>(k + 1));
    }
    store.draws = std::move(draws);
    return store;
}

}  // namespace

TEST_SUITE("model-eval")
{
    TEST_CASE("individual density is the product of its three factors")
    {
        const Individual ind = make_individual("A", {5.0, 20.0}, {0.9, 3.4}, 1.0);
        const ParameterState s = make_state(1);
        const ModelSpec spec;
        const double expected
            = longit_loglik(ind, s, 0) + glm_loglik(ind, s, 0, Family::bernoulli) + random_effect_logpdf(s.x[0], s);
        CHECK(individual_log_density(ind, 0, s, spec) == doctest::Approx(expected).epsilon(1e-14));
    }

    TEST_CASE("cpo of identical draws is the density at that point")
    {
        const Individual ind = make_individual("A", {5.0, 20.0}, {0.9, 3.4}, 1.0);
        const ParameterState s = make_state(1);
        const ModelSpec spec;
        const ChainStore store = store_of(std::vector<ParameterState>(25, s));
        CHECK(cpo_hat(ind, 0, store, spec) == doctest::Approx(std::exp(individual_log_density(ind, 0, s, spec))).epsilon(1e-13));
    }

    TEST_CASE("cpo of two draws is their harmonic mean")
    {
        const Individual ind = make_individual("A", {5.0, 20.0}, {0.9, 3.4}, 1.0);
        ParameterState a = make_state(1);
        ParameterState b = make_state(1);
        b.x[0] = vec({3.5});
        const ModelSpec spec;
        const double d1 = std::exp(individual_log_density(ind, 0, a, spec));
        const double d2 = std::exp(individual_log_density(ind, 0, b, spec));
        CHECK(cpo_hat(ind, 0, store_of({a, b}), spec) == doctest::Approx(2.0 / (1.0 / d1 + 1.0 / d2)).epsilon(1e-13));
    }

    TEST_CASE("cpo names the failing draw")
    {
        const Individual ind = make_individual("A", {5.0, 20.0}, {0.9, 3.4}, 1.0);
        ParameterState good = make_state(1);
        ParameterState bad = make_state(1);
        bad.x[0] = vec({std::numeric_limits<double>::quiet_NaN()});
        try
        {
            cpo_hat(ind, 0, store_of({good, bad}), ModelSpec{});
            FAIL("expected NumericError");
        }
        catch (const NumericError& e)
        {
            CHECK(std::string(e.what()).find("draw 1") != std::string::npos);
        }
    }

    TEST_CASE("lpml reference values")
    {
        const std::vector<double> ones{1.0, 1.0, 1.0};
        const Lpml a = lpml(ones);
        CHECK(a.mean == 0.0);
        CHECK(a.sum == 0.0);
        const std::vector<double> c{std::exp(-1.0), std::exp(-3.0)};
        const Lpml b = lpml(c);
        CHECK(b.mean == doctest::Approx(-2.0).epsilon(1e-14));
        CHECK(b.sum == doctest::Approx(-4.0).epsilon(1e-14));
        const std::vector<double> bad{0.5, 0.0};
        CHECK_THROWS_AS(lpml(bad), DomainError);
    }

    TEST_CASE("cpo report agrees with per-individual cpo")
    {
        const std::vector<Individual> data{
            make_individual("A", {5.0, 20.0}, {0.9, 3.4}, 1.0),
            make_individual("B", {12.0}, {1.6}, 0.0),
        };
        ParameterState a = make_state(2);
        ParameterState b = make_state(2);
        b.x = {vec({3.8}), vec({4.4})};
        b.sigma2_eps = 0.3;
        const ChainStore store = store_of({a, b, a});
        const CpoReport r = cpo_report(data, store, ModelSpec{});
        REQUIRE(r.cpo.size() == 2);
        for (std::size_t i = 0; i < 2; ++i)
        {
            CHECK(r.cpo[i] == doctest::Approx(cpo_hat(data[i], i, store, ModelSpec{})).epsilon(1e-13));
            CHECK(r.log_cpo[i] == doctest::Approx(std::log(r.cpo[i])).epsilon(1e-13));
        }
        CHECK(r.lpml_sum == doctest::Approx(r.log_cpo[0] + r.log_cpo[1]));
        CHECK(r.lpml_mean == doctest::Approx(r.lpml_sum / 2.0));
    }

    TEST_CASE("predicted probabilities")
    {
        const Individual ind = make_individual("A", {5.0}, {1.0}, 1.0);
        ParameterState s = make_state(1);
        s.beta = vec({0.0, 0.0});
        CHECK(predict_outcome_prob(ind, 0, store_of({s, s})) == doctest::Approx(0.5).epsilon(1e-15));
        ParameterState up = s;
        ParameterState down = s;
        up.beta = vec({50.0, 0.0});
        down.beta = vec({-50.0, 0.0});
        CHECK(predict_outcome_prob(ind, 0, store_of({up, down, up, down})) == doctest::Approx(0.5).epsilon(1e-15));
    }

    TEST_CASE("prediction requires a bernoulli chain")
    {
        const Individual ind = make_individual("A", {5.0}, {1.0}, 1.0);
        ChainStore store = store_of({make_state(1)});
        store.meta.config.family = Family::poisson;
        CHECK_THROWS_AS(predict_outcome_prob(ind, 0, store), ConfigError);
    }

    TEST_CASE("classification reference values")
    {
        const std::vector<double> p{0.9, 0.1};
        const std::vector<double> l{1.0, 0.0};
        const ClassificationReport r = classify(p, l);
        CHECK(r.error_rate == 0.0);
        CHECK(r.sensitivity == 1.0);
        CHECK(r.specificity == 1.0);

        // 124 normal all predicted normal; 49 abnormal, 13 of them predicted normal.
        std::vector<double> probs;
        std::vector<double> labels;
        for (int k = 0; k < 124; ++k)
        {
            probs.push_back(0.9);
            labels.push_back(1.0);
        }
        for (int k = 0; k < 49; ++k)
        {
            probs.push_back(k < 13 ? 0.7 : 0.2);
            labels.push_back(0.0);
        }
        const ClassificationReport t = classify(probs, labels);
        CHECK(t.confusion[0][0] == 124);
        CHECK(t.confusion[0][1] == 0);
        CHECK(t.confusion[1][0] == 13);
        CHECK(t.confusion[1][1] == 36);
        CHECK(t.error_rate == doctest::Approx(13.0 / 173.0));
        CHECK(t.sensitivity == doctest::Approx(1.0));
        CHECK(t.specificity == doctest::Approx(36.0 / 49.0));
    }

    TEST_CASE("probabilities at the cutoff are predicted normal")
    {
        const std::vector<double> p{0.5, 0.5, 0.5};
        const std::vector<double> l{1.0, 0.0, 1.0};
        const ClassificationReport r = classify(p, l, 0.5);
        CHECK(r.confusion[0][0] == 2);
        CHECK(r.confusion[1][0] == 1);
    }

    TEST_CASE("classification with an empty class is undefined")
    {
        const std::vector<double> p{0.9, 0.8};
        const std::vector<double> l{1.0, 1.0};
        CHECK_THROWS_AS(classify(p, l), DomainError);
    }

    TEST_CASE("roc reference values")
    {
        const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
        const std::vector<double> lab{0.0, 0.0, 1.0, 1.0};
        const RocAuc a = roc_auc(sep, lab);
        CHECK(a.auc == 1.0);
        CHECK(a.roc.front().fpr == 0.0);
        CHECK(a.roc.front().tpr == 0.0);
        CHECK(a.roc.back().fpr == 1.0);
        CHECK(a.roc.back().tpr == 1.0);

        const std::vector<double> tie{0.4, 0.4, 0.4, 0.4};
        CHECK(roc_auc(tie, lab).auc == 0.5);

        const std::vector<double> mixed{0.3, 0.6, 0.5, 0.9};
        CHECK(roc_auc(mixed, lab).auc == doctest::Approx(0.75));

        const std::vector<double> one{1.0, 1.0, 1.0, 1.0};
        CHECK_THROWS_AS(roc_auc(sep, one), DomainError);
    }

    TEST_CASE("hanley-mcneil standard error")
    {
        const std::vector<double> s{0.3, 0.6, 0.5, 0.9};
        const std::vector<double> l{0.0, 0.0, 1.0, 1.0};
        const double auc = 0.75;
        const double q1 = auc / (2.0 - auc);
        const double q2 = 2.0 * auc * auc / (1.0 + auc);
        const double var = (auc * (1.0 - auc) + (2.0 - 1.0) * (q1 - auc * auc) + (2.0 - 1.0) * (q2 - auc * auc)) / 4.0;
        CHECK(roc_auc(s, l).auc_sd == doctest::Approx(std::sqrt(var)));
    }
}
