#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/LU>
#include <doctest.h>

#include "helpers.h"
#include "jointmodel/error_covariance.h"
#include "jointmodel/errors.h"
#include "jointmodel/likelihood.h"
#include "jointmodel/mean_function.h"

using namespace jointmodel;
using namespace jmtest;

namespace
{

constexpr double kLog2Pi = 1.8378770664093454836;

double dense_mvn_logpdf(const VectorXd& y, const VectorXd& mean, const MatrixXd& cov)
{
    const MatrixXd inv = cov.inverse();
    const VectorXd r = y - mean;
    return -0.5 * (static_cast<double>(y.size()) * kLog2Pi + std::log(cov.determinant()) + r.dot(inv * r));
}

VectorXd random_times(std::mt19937_64& rng, int n)
{
    std::uniform_real_distribution<double> gap(0.05, 10.0);
    VectorXd t(n);
    double now = std::uniform_real_distribution<double>(0.0, 20.0)(rng);
    for (int k = 0; k < n; ++k)
    {
        t[k] = now;
        now += gap(rng);
    }
    return t;
}

}  // namespace

TEST_SUITE("model-core")
{
    TEST_CASE("growth mean reference values")
    {
        const VectorXd a = vec({15.0, 7.0});
        CHECK(growth_mean(a, 4.0, vec({15.0}))[0] == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(std::abs(growth_mean(a, 4.0, vec({1e6}))[0] - 4.0) < 1e-12);
        CHECK(std::abs(growth_mean(a, 4.0, vec({8.0}))[0] - 4.0 / (1.0 + std::exp(1.0))) < 1e-12);
        CHECK(growth_mean(a, 4.0, vec({8.0}))[0] == doctest::Approx(1.0759).epsilon(1e-4));
    }

    TEST_CASE("growth mean rejects a zero scale")
    {
        CHECK_THROWS_AS(growth_mean(vec({15.0, 0.0}), 4.0, vec({1.0})), InvalidParameter);
    }

    TEST_CASE("growth mean is monotone and shift invariant")
    {
        const VectorXd t = vec({1.0, 5.0, 9.0, 20.0, 40.0, 80.0});
        const VectorXd g = growth_mean(vec({15.0, 7.0}), 4.0, t);
        for (Eigen::Index k = 1; k < g.size(); ++k)
        {
            CHECK(g[k] > g[k - 1]);
        }
        for (double delta : {-7.5, 0.3, 12.0})
        {
            const VectorXd shifted = growth_mean(vec({15.0 + delta, 7.0}), 4.0, (t.array() + delta).matrix());
            CHECK((shifted - g).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    TEST_CASE("analytic jacobians match finite differences")
    {
        const LogisticGrowth g;
        const VectorXd a = vec({14.0, 6.5});
        const VectorXd x = vec({3.7});
        const VectorXd t = vec({2.0, 13.0, 30.0});
        const MatrixXd ja = g.jacobian_alpha(a, x, t);
        const MatrixXd jx = g.jacobian_x(a, x, t);
        for (Eigen::Index j = 0; j < 2; ++j)
        {
            VectorXd up = a;
            VectorXd down = a;
            up[j] += 1e-6;
            down[j] -= 1e-6;
            const VectorXd fd = (g.value(up, x, t) - g.value(down, x, t)) / 2e-6;
            CHECK((fd - ja.col(j)).cwiseAbs().maxCoeff() < 1e-6);
        }
        const VectorXd fdx = (g.value(a, vec({3.7 + 1e-6}), t) - g.value(a, vec({3.7 - 1e-6}), t)) / 2e-6;
        CHECK((fdx - jx.col(0)).cwiseAbs().maxCoeff() < 1e-6);
    }

    TEST_CASE("error covariance reference matrices")
    {
        CHECK(build_error_cov(1.0, 0.0, vec({1.0, 2.0, 3.0})).isApprox(MatrixXd::Identity(3, 3)));
        MatrixXd expected(2, 2);
        expected << 1.0, 0.25, 0.25, 1.0;
        CHECK((build_error_cov(1.0, 0.5, vec({0.0, 2.0})) - expected).cwiseAbs().maxCoeff() < 1e-15);
        MatrixXd e3(3, 3);
        e3 << 1.0, 0.9, 0.729, 0.9, 1.0, 0.81, 0.729, 0.81, 1.0;
        CHECK((build_error_cov(0.2, 0.9, vec({0.0, 1.0, 3.0})) - 0.2 * e3).cwiseAbs().maxCoeff() < 1e-15);
    }

    TEST_CASE("error covariance errors")
    {
        CHECK_THROWS_AS(build_error_cov(1.0, 0.5, vec({1.0, 1.0})), SingularCovariance);
        CHECK_THROWS_AS(build_error_cov(1.0, 1.0, vec({1.0, 2.0})), InvalidParameter);
        CHECK_THROWS_AS(build_error_cov(1.0, -0.1, vec({1.0, 2.0})), InvalidParameter);
        CHECK_THROWS_AS(build_error_cov(0.0, 0.5, vec({1.0, 2.0})), InvalidParameter);
        CHECK_NOTHROW(build_error_cov(1.0, 0.0, vec({1.0, 1.0})));
    }

    TEST_CASE("singular covariance names the individual")
    {
        try
        {
            CorrelationFactor f(0.5, vec({3.0, 3.0}), "P17");
            FAIL("expected SingularCovariance");
        }
        catch (const SingularCovariance& e)
        {
            CHECK(e.individual() == "P17");
            CHECK(std::string(e.what()).find("P17") != std::string::npos);
        }
    }

    TEST_CASE("covariance is symmetric and factorizable on random inputs")
    {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 200; ++trial)
        {
            const double rho = std::uniform_real_distribution<double>(0.0, 0.999)(rng);
            const double log_s2 = std::uniform_real_distribution<double>(std::log(1e-6), std::log(1e6))(rng);
            const int n = std::uniform_int_distribution<int>(1, 10)(rng);
            const MatrixXd cov = build_error_cov(std::exp(log_s2), rho, random_times(rng, n));
            CHECK(cov.isApprox(cov.transpose(), 0.0));
            CHECK(Eigen::LLT<MatrixXd>(cov).info() == Eigen::Success);
        }
    }

    TEST_CASE("longitudinal log-likelihood reference values")
    {
        ParameterState s = make_state(1);
        s.sigma2_eps = 1.0;
        s.rho = 0.0;
        Individual one = make_individual("A", {10.0}, {0.0});
        one.y = growth_mean(s.alpha, 4.0, one.times);
        CHECK(longit_loglik(one, s, 0) == doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-14));

        s.rho = 0.5;
        Individual two = make_individual("B", {0.0, 2.0}, {0.0, 0.0});
        two.y = growth_mean(s.alpha, 4.0, two.times);
        const double expected = -kLog2Pi - 0.5 * std::log(1.0 - 0.25 * 0.25);
        CHECK(longit_loglik(two, s, 0) == doctest::Approx(expected).epsilon(1e-14));
    }

    TEST_CASE("longitudinal log-likelihood matches the dense-inverse oracle")
    {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> z;
        for (int trial = 0; trial < 300; ++trial)
        {
            const int n = std::uniform_int_distribution<int>(1, 6)(rng);
            ParameterState s = make_state(1);
            s.rho = std::uniform_real_distribution<double>(0.0, 0.99)(rng);
            s.sigma2_eps = std::exp(z(rng));
            s.alpha = vec({10.0 + 5.0 * z(rng), 4.0 + std::abs(3.0 * z(rng))});
            s.x[0] = vec({4.0 + z(rng)});
            Individual ind;
            ind.id = "R";
            ind.times = random_times(rng, n);
            ind.y = VectorXd(n);
            for (int k = 0; k < n; ++k)
            {
                ind.y[k] = 3.0 + z(rng);
            }
            ind.covariates = VectorXd::Ones(1);
            const double oracle = dense_mvn_logpdf(
                ind.y, growth_mean(s.alpha, s.x[0][0], ind.times), build_error_cov(s.sigma2_eps, s.rho, ind.times));
            const double got = longit_loglik(ind, s, 0);
            CHECK(std::abs(got - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));
        }
    }

    TEST_CASE("bernoulli log-likelihood")
    {
        CHECK(glm_logpdf(Family::bernoulli, 1.0, 0.0, 1.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
        const double low = glm_logpdf(Family::bernoulli, 0.0, -50.0, 1.0);
        CHECK(std::isfinite(low));
        CHECK(std::abs(low + std::exp(-50.0)) < 1e-30);
        CHECK(std::isfinite(glm_logpdf(Family::bernoulli, 1.0, 800.0, 1.0)));
        CHECK(std::isfinite(glm_logpdf(Family::bernoulli, 0.0, -800.0, 1.0)));
        CHECK(glm_logpdf(Family::bernoulli, 1.0, -800.0, 1.0) == doctest::Approx(-800.0));

        for (double eta : {-30.0, -3.2, 0.0, 0.7, 12.0, 40.0})
        {
            const double total = std::exp(glm_logpdf(Family::bernoulli, 1.0, eta, 1.0))
                                 + std::exp(glm_logpdf(Family::bernoulli, 0.0, eta, 1.0));
            CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
        }
    }

    TEST_CASE("bernoulli probability at the reported posterior means")
    {
        ParameterState s = make_state(1);
        s.beta = vec({-22.86, 5.431});
        s.x[0] = vec({4.495});
        const Individual ind = make_individual("A", {10.0}, {1.0}, 1.0);
        const double eta = linear_predictor(ind, s.beta, s.x[0]);
        CHECK(eta == doctest::Approx(1.5524).epsilon(1e-4));
        CHECK(std::exp(glm_loglik(ind, s, 0, Family::bernoulli)) == doctest::Approx(0.8252).epsilon(1e-3));
    }

    TEST_CASE("poisson and gaussian families")
    {
        CHECK(glm_logpdf(Family::poisson, 3.0, std::log(2.0), 1.0)
              == doctest::Approx(3.0 * std::log(2.0) - 2.0 - std::lgamma(4.0)));
        CHECK(glm_logpdf(Family::gaussian, 1.5, 1.0, 0.25)
              == doctest::Approx(-0.5 * (kLog2Pi + std::log(0.25) + 0.25 / 0.25)));
        CHECK(glm_mean(Family::poisson, 0.0) == doctest::Approx(1.0));
        CHECK(glm_mean(Family::gaussian, 2.5) == doctest::Approx(2.5));
    }

    TEST_CASE("glm outcome validation")
    {
        CHECK_THROWS_AS(glm_logpdf(Family::bernoulli, 2.0, 0.0, 1.0), DataError);
        CHECK_THROWS_AS(glm_logpdf(Family::poisson, -1.0, 0.0, 1.0), DataError);
        CHECK_THROWS_AS(glm_logpdf(Family::poisson, 1.5, 0.0, 1.0), DataError);
        CHECK_THROWS_AS(parse_family("binomial2"), ConfigError);
        CHECK_THROWS_AS(parse_error_model("ar2"), ConfigError);
    }

    TEST_CASE("joint log posterior equals the sum of its components")
    {
        std::vector<Individual> data{
            make_individual("A", {5.0, 20.0}, {0.9, 3.4}, 1.0),
            make_individual("B", {12.0}, {1.6}, 0.0),
        };
        ParameterState s = make_state(2);
        s.x = {vec({4.3}), vec({3.6})};
        const Hyperparameters hyper = Hyperparameters::defaults().resolved(2, 1, 2);
        const ModelSpec spec;

        double oracle = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i)
        {
            const auto& ind = data[i];
            oracle += dense_mvn_logpdf(ind.y, growth_mean(s.alpha, s.x[i][0], ind.times),
                                       build_error_cov(s.sigma2_eps, s.rho, ind.times));
            const double eta = s.beta[0] + s.beta[1] * s.x[i][0];
            oracle += ind.outcome * eta - std::log1p(std::exp(eta));
            oracle += -0.5 * (kLog2Pi + std::log(0.2) + std::pow(s.x[i][0] - 4.0, 2) / 0.2);
        }
        // priors written out term by term
        oracle += dense_mvn_logpdf(s.alpha, hyper.a1, hyper.A);
        oracle += dense_mvn_logpdf(s.beta, hyper.s, hyper.S);
        oracle += dense_mvn_logpdf(s.mu_x, hyper.c1, hyper.C);
        const double a = hyper.sigma2_eps_prior.shape;
        const double b = hyper.sigma2_eps_prior.rate;
        oracle += a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(s.sigma2_eps) - b / s.sigma2_eps;
        const double df = hyper.v;
        const double psi = hyper.v * hyper.V(0, 0);
        const double sx = s.sigma_x(0, 0);
        oracle += 0.5 * df * std::log(psi) - 0.5 * df * std::log(2.0) - std::lgamma(0.5 * df)
                  - 0.5 * (df + 2.0) * std::log(sx) - 0.5 * psi / sx;
        oracle += 0.0;  // uniform(0,1) prior on rho

        CHECK(joint_unnorm_logpost(data, s, hyper, spec) == doctest::Approx(oracle).epsilon(1e-12));
    }

    TEST_CASE("joint log posterior with no individuals is the log prior")
    {
        const ParameterState s = make_state(0);
        const Hyperparameters hyper = Hyperparameters::defaults().resolved(2, 1, 2);
        const ModelSpec spec;
        CHECK(joint_unnorm_logpost({}, s, hyper, spec) == doctest::Approx(log_prior(s, hyper, spec)));
    }

    TEST_CASE("joint log posterior is invariant to a common shift of data and curve")
    {
        // A mean function with an additive offset, so that shifting y and g by
        // the same constant leaves every residual unchanged.
        class Offset final : public MeanFunction
        {
        public:
            explicit Offset(double c) : c_(c) {}
            Eigen::Index alpha_dim() const override { return 2; }
            Eigen::Index x_dim() const override { return 1; }
            VectorXd value(const VectorXd& a, const VectorXd& x, const VectorXd& t) const override
            {
                return (base_.value(a, x, t).array() + c_).matrix();
            }

        private:
            LogisticGrowth base_;
            double c_;
        };
        std::vector<Individual> data{make_individual("A", {5.0, 20.0}, {0.9, 3.4}, 1.0)};
        ParameterState s = make_state(1);
        const Hyperparameters hyper = Hyperparameters::defaults().resolved(2, 1, 2);
        ModelSpec spec;
        const double base = joint_unnorm_logpost(data, s, hyper, spec);
        std::vector<Individual> shifted = data;
        shifted[0].y.array() += 7.25;
        spec.mean = std::make_shared<Offset>(7.25);
        CHECK(joint_unnorm_logpost(shifted, s, hyper, spec) == doctest::Approx(base).epsilon(1e-12));
    }

    TEST_CASE("analytic posterior gradient matches central differences")
    {
        std::vector<Individual> data{
            make_individual("A", {5.0, 9.0, 20.0}, {0.9, 1.7, 3.4}, 1.0),
            make_individual("B", {12.0}, {1.6}, 0.0),
            make_individual("C", {30.0, 31.0}, {3.9, 4.2}, 1.0),
        };
        ParameterState s = make_state(3);
        s.x = {vec({4.3}), vec({3.6}), vec({4.1})};
        s.beta = vec({-8.0, 2.1});
        const Hyperparameters hyper = Hyperparameters::defaults().resolved(2, 1, 2);
        const ModelSpec spec;
        const auto grad = joint_unnorm_logpost_gradient(data, s, hyper, spec);

        const auto check = [&](double analytic, auto&& set) {
            const double h = 1e-5;
            ParameterState up = s;
            ParameterState down = s;
            set(up, h);
            set(down, -h);
            const double fd = (joint_unnorm_logpost(data, up, hyper, spec) - joint_unnorm_logpost(data, down, hyper, spec))
                              / (2.0 * h);
            CHECK(std::abs(analytic - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
        };
        for (Eigen::Index j = 0; j < 2; ++j)
        {
            check(grad.alpha[j], [j](ParameterState& p, double h) { p.alpha[j] += h; });
            check(grad.beta[j], [j](ParameterState& p, double h) { p.beta[j] += h; });
        }
        check(grad.mu_x[0], [](ParameterState& p, double h) { p.mu_x[0] += h; });
        check(grad.sigma2_eps, [](ParameterState& p, double h) { p.sigma2_eps += h; });
        for (std::size_t i = 0; i < 3; ++i)
        {
            check(grad.x[i][0], [i](ParameterState& p, double h) { p.x[i][0] += h; });
        }
    }

    TEST_CASE("parameter state invariants")
    {
        ParameterState s = make_state(2);
        CHECK_NOTHROW(validate(s));
        s.rho = 1.0;
        CHECK_THROWS_AS(validate(s), InvalidParameter);
        s = make_state(2);
        s.sigma2_eps = 0.0;
        CHECK_THROWS_AS(validate(s), InvalidParameter);
        s = make_state(2);
        s.sigma_x = scalar_matrix(-0.1);
        CHECK_THROWS_AS(validate(s), InvalidParameter);
    }

    TEST_CASE("individual invariants")
    {
        Individual ind = make_individual("A", {1.0, 2.0}, {0.5, 0.7});
        CHECK_NOTHROW(validate(ind));
        ind.times = vec({2.0, 1.0});
        CHECK_THROWS_AS(validate(ind), DataError);
        ind = make_individual("A", {1.0, 2.0}, {0.5});
        CHECK_THROWS_AS(validate(ind), DataError);
    }

    TEST_CASE("default hyperparameters")
    {
        const Hyperparameters h = Hyperparameters::defaults().resolved(2, 1, 2);
        CHECK(h.a1.isZero());
        CHECK(h.A.isApprox(1000.0 * MatrixXd::Identity(2, 2)));
        CHECK(h.S.isApprox(1000.0 * MatrixXd::Identity(2, 2)));
        CHECK(h.C(0, 0) == 1000.0);
        CHECK(h.v == 6.0);
        CHECK(h.V(0, 0) == doctest::Approx(0.00083));
        CHECK(h.sigma2_eps_prior.shape == 3.0);
        CHECK(h.sigma2_eps_prior.rate == doctest::Approx(0.01));
        CHECK(h.rho_lower == 0.0);
        CHECK(h.rho_upper == 1.0);
        CHECK_THROWS_AS(Hyperparameters::defaults().resolved(3, 1, 2), ConfigError);
    }
}
