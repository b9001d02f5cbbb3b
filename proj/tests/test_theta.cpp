#include "doctest.h"

#include <random>

#include "desert/error.hpp"
#include "desert/simulate.hpp"
#include "desert/theta.hpp"
#include "helpers.hpp"

using namespace desert;

namespace {

NuisanceEstimates constant_estimates(const PointwiseParams& p, std::size_t d = 1,
                                     SensitivityParams sens = SensitivityParams::baseline()) {
    BasisConfig c;
    c.interaction_order = 0;
    const Basis b(c, d);
    Eigen::VectorXd packed(4);
    packed << logit(p.tau0), logit(p.tau1), logit(p.alpha), logit(p.beta);
    return NuisanceEstimates::from_packed(b, packed, 0.0, sens);
}

// m(mu) = sum_sz pi_sz g_sz with (tau, alpha, beta) read off mu.
double composite(const PointwiseMu& m, const std::array<double, 4>& pi) {
    const TauPair t = invert_tau(m);
    const Mechanism mech = recover_mechanism(m, t.t0, t.t1);
    const PointwiseParams xi{t.t0, t.t1, mech.alpha, mech.beta};
    double v = 0.0;
    for (int s = 0; s < 2; ++s)
        for (int z = 0; z < 2; ++z) v += pi[static_cast<std::size_t>(2 * s + z)] * theta_integrand(xi, s, z);
    return v;
}

struct TrueValues {
    std::vector<PointwiseParams> xi;
    std::vector<std::array<double, 4>> pi;
};

TrueValues true_values(const Dataset& d) {
    TrueValues t;
    for (const auto& r : d.records()) {
        t.xi.push_back(dgp::params(r.x[0], r.x[1]));
        t.pi.push_back(dgp::propensity(r.x[0], r.x[1]));
    }
    return t;
}

}  // namespace

TEST_SUITE("theta") {

TEST_CASE("plug-in arithmetic") {
    std::vector<ObservationRecord> recs;
    for (int i = 0; i < 40; ++i) recs.push_back({i % 2, (i / 2) % 2, {i / 40.0}, i % 3 == 0});
    const Dataset d(recs, {"x"}, Scaling::identity(1), true);
    const ThetaEstimate t = theta_plugin(constant_estimates({0.5, 0.5, 0.2, 0.1}), d);
    CHECK(t.point == doctest::Approx(0.5 * (0.5 * 0.2) + 0.5 * (0.5 * 0.1)).epsilon(1e-12));
    CHECK(t.ci_low <= t.point);
    CHECK(t.ci_high >= t.point);

    const ThetaEstimate fair = theta_plugin(constant_estimates({0.3, 0.7, 1e-300, 1e-300}), d);
    CHECK(fair.point < 1e-15);

    const auto k = constant_estimates({0.5, 0.5, 0.2, 0.1}, 1, SensitivityParams::kappa(0, 0));
    CHECK_THROWS_AS(theta_plugin(k, d), InvalidArgument);
    CHECK(theta_plugin_variant(k, d) == doctest::Approx(t.point).epsilon(1e-15));
    const auto del = constant_estimates({0.5, 0.5, 0.2, 0.1}, 1, SensitivityParams::delta(0, 0));
    CHECK(theta_plugin_variant(del, d) == doctest::Approx(t.point).epsilon(1e-15));
    const auto zet = constant_estimates({0.5, 0.5, 0.2, 0.1}, 1, SensitivityParams::zeta(0, 0));
    CHECK(theta_plugin_variant(zet, d) == doctest::Approx(t.point).epsilon(1e-15));
}

TEST_CASE("integrand with true nuisances matches the simulated disagreement rate") {
    DgpConfig c;
    c.n = 100000;
    c.seed = 8;
    const auto sim = gen_dataset(c);
    double integrand = 0.0, disagree = 0.0;
    for (std::size_t i = 0; i < sim.data.size(); ++i) {
        const auto& r = sim.data[i];
        integrand += theta_integrand(dgp::params(r.x[0], r.x[1]), r.s, r.z);
        disagree += r.y != sim.y_star[i];
    }
    CHECK(std::abs(integrand - disagree) / static_cast<double>(c.n) < 0.005);
}

TEST_CASE("influence coefficients match finite differences of the composite map") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    double worst = 0.0;
    int used = 0;
    while (used < 100) {
        const PointwiseParams xi{u(rng), u(rng), 0.6 * u(rng), 0.6 * u(rng)};
        if (std::abs(xi.tau1 - xi.tau0) < 0.05) continue;
        std::array<double, 4> pi{u(rng), u(rng), u(rng), u(rng)};
        const double total = pi[0] + pi[1] + pi[2] + pi[3];
        for (auto& v : pi) v /= total;
        const auto c = influence_coefficients(xi, pi);
        const PointwiseMu m = forward_mu(xi);
        for (int k = 0; k < 4; ++k) {
            const double h = 1e-6;
            PointwiseMu a = m, b = m;
            double* pa[4] = {&a.mu00, &a.mu01, &a.mu10, &a.mu11};
            double* pb[4] = {&b.mu00, &b.mu01, &b.mu10, &b.mu11};
            *pa[k] += h;
            *pb[k] -= h;
            const double fd = (composite(a, pi) - composite(b, pi)) / (2 * h) / pi[static_cast<std::size_t>(k)];
            worst = std::max(worst, std::abs(fd - c[static_cast<std::size_t>(k)]) /
                                        std::max(1.0, std::abs(fd)));
        }
        ++used;
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("one-step equals plug-in plus the augmentation mean") {
    DgpConfig c;
    c.n = 3000;
    c.seed = 5;
    const auto sim = gen_dataset(c);
    const TrueValues t = true_values(sim.data);
    const ThetaEstimate os = theta_onestep_values(sim.data, t.xi, t.pi, 0.95, 0.0);
    double plug = 0.0, aug = 0.0;
    for (std::size_t i = 0; i < sim.data.size(); ++i) {
        const auto& r = sim.data[i];
        plug += theta_integrand(t.xi[i], r.s, r.z);
        try {
            const auto coef = influence_coefficients(t.xi[i], t.pi[i]);
            aug += coef[static_cast<std::size_t>(2 * r.s + r.z)] * (r.y - forward_mu(t.xi[i]).at(r.s, r.z));
        } catch (const Error&) {
        }
    }
    const double n = static_cast<double>(sim.data.size());
    CHECK(os.point == doctest::Approx(plug / n + aug / n).epsilon(1e-12));
    CHECK(os.std_error >= 0.0);
    CHECK(os.ci_low <= os.point);
    CHECK(os.ci_high >= os.point);
    CHECK(os.ci_high - os.ci_low == doctest::Approx(2 * 1.959963984540054 * os.std_error).epsilon(1e-12));
}

TEST_CASE("augmentation is mean zero under true nuisances") {
    DgpConfig c;
    c.n = 100000;
    c.seed = 77;
    const auto sim = gen_dataset(c);
    const TrueValues t = true_values(sim.data);
    for (double trim : {0.0, kRelevanceTrim}) {
        std::vector<double> aug;
        for (std::size_t i = 0; i < sim.data.size(); ++i) {
            const auto& r = sim.data[i];
            if (std::abs(t.xi[i].tau1 - t.xi[i].tau0) < trim) continue;
            const auto coef = influence_coefficients(t.xi[i], t.pi[i]);
            aug.push_back(coef[static_cast<std::size_t>(2 * r.s + r.z)] *
                          (r.y - forward_mu(t.xi[i]).at(r.s, r.z)));
        }
        double m = 0.0, v = 0.0;
        for (double a : aug) m += a;
        m /= static_cast<double>(aug.size());
        for (double a : aug) v += (a - m) * (a - m);
        const double se = std::sqrt(v / static_cast<double>(aug.size())) / std::sqrt(static_cast<double>(aug.size()));
        CAPTURE(trim);
        CHECK(std::abs(m) <= 3 * se);
    }
}

TEST_CASE("interval width scales with the square root of n") {
    std::vector<double> widths;
    for (std::size_t n : {2000u, 8000u, 32000u}) {
        DgpConfig c;
        c.n = n;
        c.seed = 400 + n;
        const auto sim = gen_dataset(c);
        const TrueValues t = true_values(sim.data);
        // A wide trim keeps the influence function bounded, so single-sample SEs are stable.
        const ThetaEstimate os = theta_onestep_values(sim.data, t.xi, t.pi, 0.95, 0.1);
        widths.push_back(os.ci_high - os.ci_low);
    }
    CHECK(widths[0] / widths[1] == doctest::Approx(2.0).epsilon(0.1));
    CHECK(widths[1] / widths[2] == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("trimming excludes units with a weak auxiliary variable") {
    std::vector<ObservationRecord> recs;
    std::vector<PointwiseParams> xi;
    std::vector<std::array<double, 4>> pi;
    for (int i = 0; i < 100; ++i) {
        recs.push_back({i % 2, (i / 2) % 2, {i / 100.0}, i % 3 == 0});
        xi.push_back(i < 10 ? PointwiseParams{0.5, 0.505, 0.2, 0.1} : PointwiseParams{0.3, 0.6, 0.2, 0.1});
        pi.push_back({0.25, 0.25, 0.25, 0.25});
    }
    const Dataset d(recs, {"x"}, Scaling::identity(1), true);
    const ThetaEstimate t = theta_onestep_values(d, xi, pi);
    CHECK(t.excluded == 10);
    CHECK_FALSE(t.warnings.empty());
    CHECK(theta_onestep_values(d, xi, pi, 0.95, 0.0).excluded == 0);
    CHECK_THROWS_AS(theta_onestep_values(d, xi, pi, 1.5), InvalidArgument);
}

TEST_CASE("bootstrap") {
    std::vector<ObservationRecord> recs;
    for (int i = 0; i < 80; ++i) recs.push_back({i % 2, (i / 2) % 2, {i / 80.0}, i % 3 == 0});
    const Dataset d(recs, {"x"}, Scaling::identity(1), true);
    const NuisanceEstimates flat = constant_estimates({0.5, 0.5, 0.2, 0.2});
    const Fitter same = [&](const Dataset&, std::uint64_t) { return flat; };
    const ThetaEstimate t = theta_bootstrap(same, flat, d, 200, 1);
    CHECK(t.point == doctest::Approx(0.1));
    CHECK(t.ci_low == doctest::Approx(0.1));
    CHECK(t.ci_high == doctest::Approx(0.1));
    CHECK(t.replicates == 200);
    CHECK_THROWS_AS(theta_bootstrap(same, flat, d, 100, 1), InvalidArgument);

    int calls = 0;
    const Fitter flaky = [&](const Dataset&, std::uint64_t s) {
        ++calls;
        if (s % 4 == 0) throw ConvergenceError("no");
        return flat;
    };
    CHECK_THROWS_AS(theta_bootstrap(flaky, flat, d, 200, 1), ConvergenceError);

    // Same seed, same draws regardless of worker count.
    const NuisanceEstimates var = constant_estimates({0.3, 0.6, 0.2, 0.1});
    const Fitter fixed = [&](const Dataset&, std::uint64_t) { return var; };
    const ThetaEstimate a = theta_bootstrap(fixed, var, d, 200, 9, 0.9, 1);
    const ThetaEstimate b = theta_bootstrap(fixed, var, d, 200, 9, 0.9, 4);
    CHECK(a.ci_low == b.ci_low);
    CHECK(a.ci_high == b.ci_high);
    CHECK(a.ci_low < a.ci_high);
}

}
