#include "doctest.h"

#include "desert/error.hpp"
#include "desert/sensitivity.hpp"
#include "desert/simulate.hpp"

using namespace desert;

TEST_SUITE("sensitivity") {

TEST_CASE("flip rate") {
    const std::vector<double> a{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    CHECK(flip_rate(a, a, 0.5) == 0.0);
    const std::vector<double> rev(a.rbegin(), a.rend());
    CHECK(flip_rate(a, rev, 0.5) == 1.0);
    CHECK(flip_rate(a, rev, 0.5) == flip_rate(rev, a, 0.5));
    std::vector<double> tiny = a;
    for (auto& v : tiny) v += 1e-9;
    CHECK(flip_rate(a, tiny, 0.5) == 0.0);
    CHECK_THROWS_AS(flip_rate(a, {0.1}, 0.5), DimensionError);
}

TEST_CASE("default grids") {
    CHECK(default_grid(Variant::delta).size() == 4);
    CHECK(default_grid(Variant::zeta).size() == 4);
    CHECK(default_grid(Variant::kappa).size() == 9);
    for (const auto& p : default_grid(Variant::delta)) CHECK(p.first.constant == p.second.constant);
    SweepSpec empty;
    CHECK_THROWS(empty.validate());
}

TEST_CASE("zero grid point reproduces the baseline and order does not matter") {
    DgpConfig c;
    c.n = 1500;
    c.seed = 41;
    const auto sim = gen_dataset(c);
    FitOptions o;
    o.restarts = 4;
    SweepSpec spec;
    spec.variant = Variant::delta;
    spec.boot = 0;
    spec.grid = {SensitivityParams::delta(0.05, 0.05), SensitivityParams::delta(0, 0)};
    const SweepTable t = run_sweep(sim.data, simulation_basis(), o, spec);
    REQUIRE(t.rows.size() == 2);
    REQUIRE(t.rows[1].ok);
    CHECK(t.rows[1].theta.point == doctest::Approx(t.baseline_theta).epsilon(1e-5));
    CHECK(t.rows[1].mean_abs_tau_diff < 1e-4);
    CHECK(t.rows[1].flip_rate < 0.01);
    CHECK(t.rows[1].diagnostics.criterion == doctest::Approx(t.baseline.criterion).epsilon(1e-8));

    SweepSpec swapped = spec;
    std::swap(swapped.grid[0], swapped.grid[1]);
    const SweepTable u = run_sweep(sim.data, simulation_basis(), o, swapped);
    CHECK(u.rows[0].theta.point == t.rows[1].theta.point);
    CHECK(u.rows[1].theta.point == t.rows[0].theta.point);
}

TEST_CASE("the matching delta row is closest to the truth") {
    // Averaged over a few samples: single draws at this n can order the rows either way.
    DgpConfig c;
    c.n = 4000;
    c.delta = 0.05;
    const double truth = true_theta(c);
    FitOptions o;
    o.restarts = 4;
    SweepSpec spec;
    spec.variant = Variant::delta;
    spec.boot = 0;
    spec.grid = {SensitivityParams::delta(0, 0), SensitivityParams::delta(0.05, 0.05),
                 SensitivityParams::delta(0.1, 0.1)};
    std::vector<double> mean(3, 0.0);
    const int samples = 3;
    for (int k = 0; k < samples; ++k) {
        c.seed = 1 + static_cast<std::uint64_t>(k);
        const SweepTable t = run_sweep(gen_dataset(c).data, simulation_basis(), o, spec);
        for (std::size_t i = 0; i < 3; ++i) {
            REQUIRE(t.rows[i].ok);
            mean[i] += t.rows[i].theta.point / samples;
        }
    }
    std::vector<double> err;
    for (double m : mean) err.push_back(std::abs(m - truth));
    CHECK(err[1] < err[0]);
    CHECK(err[1] < err[2]);
}

}
