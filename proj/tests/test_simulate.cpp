#include "doctest.h"

#include <cmath>
#include <random>

#include "desert/error.hpp"
#include "desert/simulate.hpp"

using namespace desert;

namespace {

double ex(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Design functions written out from the model statement.
double t0(double a, double b) { return ex(-3 + 5 * a + std::sin(b)); }
double t1(double a, double b) { return ex(-3 + a + 6 * std::sin(b)); }
double al(double a, double b) { return ex(-1 - std::sin(a) + 2 * std::exp(-b)); }
double ps(double a, double b) { return ex(2 - 2 * std::sin(a) - 2 * b); }
double pz(double a, double b) { return ex(1 - a - std::sin(b)); }

// Midpoint rule on a fine grid.
template <class F>
double integrate2(F f, int m = 400) {
    double s = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) s += f((i + 0.5) / m, (j + 0.5) / m);
    return s / (m * m);
}

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                pairs += 1;
                num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return num / pairs;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("design functions") {
    for (double a : {0.1, 0.5, 0.9})
        for (double b : {0.2, 0.7}) {
            CHECK(dgp::tau0(a, b) == doctest::Approx(t0(a, b)).epsilon(1e-14));
            CHECK(dgp::tau1(a, b) == doctest::Approx(t1(a, b)).epsilon(1e-14));
            CHECK(dgp::alpha(a, b) == doctest::Approx(al(a, b)).epsilon(1e-14));
            CHECK(dgp::prob_s(a, b) == doctest::Approx(ps(a, b)).epsilon(1e-14));
            CHECK(dgp::prob_z(a, b) == doctest::Approx(pz(a, b)).epsilon(1e-14));
        }
}

TEST_CASE("one-sided errors hold exactly without violations") {
    DgpConfig c;
    c.n = 20000;
    c.seed = 3;
    const auto sim = gen_dataset(c);
    for (std::size_t i = 0; i < sim.data.size(); ++i) {
        const auto& r = sim.data[i];
        if (r.s == 0 && sim.y_star[i] == 0) CHECK(r.y == 0);
        if (r.s == 1 && sim.y_star[i] == 1) CHECK(r.y == 1);
    }
    CHECK_THROWS(gen_dataset(DgpConfig{50}));
    DgpConfig bad;
    bad.delta = 0.5;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("large-sample error rates") {
    DgpConfig c;
    c.n = 1000000;
    c.seed = 10;
    const auto sim = gen_dataset(c);
    double down = 0.0, ones = 0.0, disagree = 0.0;
    for (std::size_t i = 0; i < sim.data.size(); ++i) {
        const auto& r = sim.data[i];
        disagree += r.y != sim.y_star[i];
        if (r.s == 0 && sim.y_star[i] == 1) {
            ones += 1;
            down += r.y == 0;
        }
    }
    // f(Y=0 | Y*=1, S=0) weights alpha(X) by f(Y*=1, S=0 | X).
    const auto w = [](double a, double b) { return (1 - ps(a, b)) * ((1 - pz(a, b)) * t0(a, b) + pz(a, b) * t1(a, b)); };
    const double oracle = integrate2([&](double a, double b) { return w(a, b) * al(a, b); }) / integrate2(w);
    CHECK(std::abs(down / ones - oracle) < 0.005);
    CHECK(std::abs(disagree / static_cast<double>(c.n) - true_theta(c)) < 0.002);

    c.delta = 0.1;
    c.n = 1000000;
    const auto viol = gen_dataset(c);
    double up = 0.0, zeros = 0.0;
    for (std::size_t i = 0; i < viol.data.size(); ++i) {
        const auto& r = viol.data[i];
        if (r.s == 0 && viol.y_star[i] == 0) {
            zeros += 1;
            up += r.y == 1;
        }
    }
    CHECK(std::abs(up / zeros - 0.1) < 0.01);
}

TEST_CASE("true theta against an independent quadrature") {
    for (double delta : {0.0, 0.05, 0.1}) {
        DgpConfig c;
        c.delta = delta;
        const double oracle = integrate2([&](double a, double b) {
            const double be = ex(-1 + 2 * std::exp(-a) - b);
            double v = 0.0;
            for (int s = 0; s < 2; ++s)
                for (int z = 0; z < 2; ++z) {
                    const double wgt = (s ? ps(a, b) : 1 - ps(a, b)) * (z ? pz(a, b) : 1 - pz(a, b));
                    const double tau = z ? t1(a, b) : t0(a, b);
                    const double down = s ? delta : al(a, b);
                    const double up = s ? be : delta;
                    v += wgt * (tau * down + (1 - tau) * up);
                }
            return v;
        });
        CAPTURE(delta);
        CHECK(true_theta(c) == doctest::Approx(oracle).epsilon(1e-5));
    }
}

TEST_CASE("auc") {
    CHECK(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
    CHECK(auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == 0.75);
    CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), InvalidArgument);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s(300);
    std::vector<int> y(300);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = std::round(u(rng) * 20) / 20;  // ties on purpose
        y[i] = u(rng) < 0.3 + 0.4 * s[i];
    }
    CHECK(auc(s, y) == doctest::Approx(brute_auc(s, y)).epsilon(1e-12));
    std::vector<double> t(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3 * s[i]) - 7;
    CHECK(auc(t, y) == auc(s, y));

    std::vector<double> noise(20000);
    std::vector<int> lab(20000);
    for (std::size_t i = 0; i < noise.size(); ++i) {
        noise[i] = u(rng);
        lab[i] = u(rng) < 0.5;
    }
    CHECK(std::abs(auc(noise, lab) - 0.5) < 0.02);
}

TEST_CASE("monte carlo results do not depend on the worker count") {
    MonteCarloConfig c;
    c.dgp.n = 600;
    c.dgp.seed = 5;
    c.reps = 3;
    c.test_size = 5000;
    c.fit.restarts = 2;
    c.methods = {Method::dsd, Method::uml, Method::ftu};
    const MonteCarloSummary a = monte_carlo(c);
    c.jobs = 3;
    const MonteCarloSummary b = monte_carlo(c);
    REQUIRE(a.replications.size() == 3);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(a.replications[r].ok == b.replications[r].ok);
        for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
            const double x = a.replications[r].auc_ystar[m];
            const double y = b.replications[r].auc_ystar[m];
            // Methods that were not run hold NaN in both.
            CHECK(((std::isnan(x) && std::isnan(y)) || x == y));
        }
        CHECK(a.replications[r].theta_hat == b.replications[r].theta_hat);
    }
    CHECK(a.methods[0].auc_ystar_mean == b.methods[0].auc_ystar_mean);
    CHECK(a.coverage >= 0.0);
    CHECK(a.coverage <= 1.0);
    CHECK(method_from_string("MLC") == Method::mlc);
    CHECK(to_string(Method::ld) == "LD");
}

}
