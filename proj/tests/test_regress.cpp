#include "doctest.h"

#include <random>

#include "desert/error.hpp"
#include "desert/regress.hpp"
#include "desert/simulate.hpp"
#include "helpers.hpp"

using namespace desert;

namespace {

double fd_rel_error(const Eigen::VectorXd& analytic, const std::function<double(const Eigen::VectorXd&)>& f,
                    const Eigen::VectorXd& x) {
    Eigen::VectorXd num(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(k)));
        Eigen::VectorXd a = x, b = x;
        a(k) += h;
        b(k) -= h;
        num(k) = (f(a) - f(b)) / (2 * h);
    }
    return (analytic - num).norm() / std::max(1.0, num.norm());
}

}  // namespace

TEST_SUITE("regress") {

TEST_CASE("intercept-only logit recovers the Bernoulli mean") {
    Eigen::MatrixXd f = Eigen::MatrixXd::Ones(8, 1);
    Eigen::VectorXd y(8);
    y << 1, 0, 0, 0, 1, 0, 0, 0;
    const LogitFit fit = fit_logit(f, y);
    CHECK(expit(fit.gamma(0)) == doctest::Approx(0.25).epsilon(1e-7));
    for (std::size_t k = 1; k < fit.trace.size(); ++k) CHECK(fit.trace[k] >= fit.trace[k - 1] - 1e-15);
}

TEST_CASE("separated labels without ridge fail, with ridge succeed") {
    Eigen::MatrixXd f = Eigen::MatrixXd::Ones(5, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(5);
    LogitOptions none;
    none.ridge = 0.0;
    CHECK_THROWS_AS(fit_logit(f, y, none), ConvergenceError);
    LogitOptions ridge;
    ridge.ridge = 1e-2;
    CHECK_NOTHROW(fit_logit(f, y, ridge));
}

TEST_CASE("logistic model with known coefficients") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 100000;
    Eigen::MatrixXd f(n, 3);
    Eigen::VectorXd y(n);
    const Eigen::Vector3d truth(-1.0, 2.0, -0.5);
    for (int i = 0; i < n; ++i) {
        f.row(i) << 1.0, u(rng), u(rng);
        y(i) = u(rng) < expit(f.row(i).dot(truth));
    }
    const LogitFit fit = fit_logit(f, y);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(fit.gamma(k) - truth(k)) < 0.05);
}

TEST_CASE("logit and multinomial gradients match finite differences") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 60, j = 4;
    Eigen::MatrixXd f(n, j);
    Eigen::VectorXd y(n), w(n);
    std::vector<int> cls(n);
    for (int i = 0; i < n; ++i) {
        f(i, 0) = 1.0;
        for (int k = 1; k < j; ++k) f(i, k) = u(rng);
        y(i) = u(rng) < 0.4;
        w(i) = 0.5 + u(rng);
        cls[i] = i % 4;
    }
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd gam(j), grad;
        for (int k = 0; k < j; ++k) gam(k) = g(rng);
        logit_loglik(gam, f, y, w, 1e-3, &grad);
        CHECK(fd_rel_error(grad, [&](const Eigen::VectorXd& v) { return logit_loglik(v, f, y, w, 1e-3); },
                           gam) < 1e-6);
        Eigen::VectorXd packed(3 * j), mg;
        for (int k = 0; k < 3 * j; ++k) packed(k) = g(rng);
        multinomial_loglik(packed, f, cls, 1e-3, &mg);
        CHECK(fd_rel_error(mg, [&](const Eigen::VectorXd& v) { return multinomial_loglik(v, f, cls, 1e-3); },
                           packed) < 1e-6);
    }
}

TEST_CASE("intercept-only multinomial reproduces class shares") {
    Eigen::MatrixXd f = Eigen::MatrixXd::Ones(10, 1);
    std::vector<int> cls{0, 0, 0, 0, 1, 2, 2, 2, 3, 3};
    const Basis one(BasisConfig{BasisFamily::polynomial, 1, 0}, 1);
    const PropensityModel m = fit_multinomial(one, f, cls);
    const auto p = m.probs(Eigen::VectorXd::Ones(1));
    CHECK(p[0] == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(p[3] == doctest::Approx(0.2).epsilon(1e-6));
    std::vector<int> missing{0, 1, 2, 0};
    CHECK_THROWS_AS(fit_multinomial(one, Eigen::MatrixXd::Ones(4, 1), missing), PositivityError);
}

TEST_CASE("propensity floor and renormalization") {
    const auto p = floor_probabilities({0.001, 0.3, 0.3, 0.399}, 0.01);
    double sum = 0.0;
    for (double v : p) {
        CHECK(v >= 0.01 - 1e-15);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p[0] == doctest::Approx(0.01).epsilon(1e-12));
    const auto u = floor_probabilities({0.25, 0.25, 0.25, 0.25}, 0.01);
    for (double v : u) CHECK(v == 0.25);
}

TEST_CASE("fitted propensity approximates the product of the design margins") {
    DgpConfig c;
    c.n = 100000;
    c.seed = 17;
    const auto sim = gen_dataset(c);
    const PropensityModel m = fit_propensity(sim.data, simulation_basis());
    double worst = 0.0;
    for (double x1 = 0.05; x1 < 1.0; x1 += 0.1)
        for (double x2 = 0.05; x2 < 1.0; x2 += 0.1) {
            const auto truth = dgp::propensity(x1, x2);
            for (int s = 0; s < 2; ++s)
                for (int z = 0; z < 2; ++z)
                    worst = std::max(worst, std::abs(predict_pi(m, s, z, {x1, x2}) -
                                                     truth[static_cast<std::size_t>(2 * s + z)]));
        }
    CHECK(worst <= 0.03);
}

TEST_CASE("intercept-only mu model returns stratum means") {
    const Dataset d = testing::constant_model_data(4000, {0.3, 0.6, 0.25, 0.15}, 9);
    BasisConfig c;
    c.interaction_order = 0;
    const MuModel mu = fit_mu_model(d, c);
    for (int s = 0; s < 2; ++s)
        for (int z = 0; z < 2; ++z) {
            double sum = 0.0, cnt = 0.0;
            for (const auto& r : d.records())
                if (r.s == s && r.z == z) {
                    sum += r.y;
                    cnt += 1;
                }
            CHECK(predict_mu(mu, s, z, {0.37}) == doctest::Approx(sum / cnt).epsilon(1e-7));
        }
}

}
