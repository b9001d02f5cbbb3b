#include "doctest.h"

#include <random>

#include "desert/baselines.hpp"
#include "desert/error.hpp"
#include "desert/simulate.hpp"

using namespace desert;

namespace {

Dataset make(std::size_t n, std::uint64_t seed, int mode) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ObservationRecord> recs(n);
    for (auto& r : recs) {
        r.x = {u(rng), u(rng)};
        r.s = u(rng) < 0.5;
        r.z = u(rng) < 0.5;
        switch (mode) {
            case 0: r.y = u(rng) < 0.3; break;                                  // independent
            case 1: r.y = r.s; break;                                           // Y = S
            default: r.y = u(rng) < 0.2 + 0.3 * r.z + 0.3 * r.x[0]; break;      // no S effect
        }
    }
    return Dataset(std::move(recs), {"x1", "x2"}, Scaling::identity(2), true);
}

double mean_gap(const ScoreModel& m, const Dataset& d) {
    double g = 0.0;
    for (const auto& r : d.records()) g += m.eval(1, r.z, r.x) - m.eval(0, r.z, r.x);
    return g / static_cast<double>(d.size());
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("independent outcome gives flat scores") {
    const Dataset d = make(5000, 1, 0);
    double ybar = 0.0;
    for (const auto& r : d.records()) ybar += r.y;
    ybar /= static_cast<double>(d.size());
    const ScoreModel uml = fit_uml(d, 3, 1);
    const ScoreModel ftu = fit_ftu(d, 3, 1);
    for (double a : {0.2, 0.8})
        for (int z = 0; z < 2; ++z) {
            CHECK(std::abs(uml.eval(0, z, {a, 0.5}) - ybar) < 0.05);
            CHECK(std::abs(ftu.eval(1, z, {a, 0.5}) - ybar) < 0.05);
        }
}

TEST_CASE("outcome equal to S") {
    const Dataset d = make(2000, 2, 1);
    // Perfect separation: either a convergence error or extreme scores.
    try {
        const ScoreModel uml = fit_uml(d, 3, 1);
        CHECK(uml.eval(1, 0, {0.5, 0.5}) > 0.99);
        CHECK(uml.eval(0, 0, {0.5, 0.5}) < 0.01);
    } catch (const ConvergenceError&) {
    }
    const ScoreModel ftu = fit_ftu(d, 3, 1);
    CHECK(std::abs(ftu.eval(1, 0, {0.5, 0.5}) - 0.5) < 0.1);
    CHECK(ftu.eval(1, 1, {0.3, 0.3}) == ftu.eval(0, 1, {0.3, 0.3}));
}

TEST_CASE("constrained learner") {
    DgpConfig c;
    c.n = 2000;
    const auto sim = gen_dataset(c);
    const ScoreModel mlc = fit_mlc(sim.data);
    CHECK(std::abs(mean_gap(mlc, sim.data)) <= 1e-4);
    CHECK(std::abs(mlc.constraint) <= 1e-4);
    CHECK(mlc.warnings.empty());

    const Dataset fair = make(4000, 3, 2);
    const ScoreModel a = fit_mlc(fair, 3, 1);
    const ScoreModel b = fit_uml(fair, 3, 1);
    double worst = 0.0;
    for (const auto& r : fair.records()) worst = std::max(worst, std::abs(a.eval(r.s, r.z, r.x) - b.eval(r.s, r.z, r.x)));
    CHECK(worst < 0.05);
}

TEST_CASE("label debiasing") {
    const Dataset fair = make(4000, 4, 0);
    const ScoreModel ftu = fit_ftu(fair, 3, 1);
    const ScoreModel ld0 = fit_ld(fair, 3, 1, 0.05);
    CHECK(ld0.iterations == 1);
    CHECK(ld0.gamma.isApprox(ftu.gamma, 1e-8));

    DgpConfig c;
    c.n = 2000;
    const auto sim = gen_dataset(c);
    const ScoreModel ld = fit_ld(sim.data);
    CHECK(std::abs(ld.constraint) < 1e-3);
    CHECK(ld.warnings.empty());
    CHECK(ld.iterations <= 50);
    double g1 = 0.0, g0 = 0.0, n1 = 0.0, n0 = 0.0;
    const Eigen::VectorXd s = ld.eval_rows(sim.data);
    for (std::size_t i = 0; i < sim.data.size(); ++i) {
        if (sim.data[i].s) {
            g1 += s(static_cast<Eigen::Index>(i));
            n1 += 1;
        } else {
            g0 += s(static_cast<Eigen::Index>(i));
            n0 += 1;
        }
    }
    CHECK(std::abs(g1 / n1 - g0 / n0) < 1e-3);
}

TEST_CASE("binary inputs enter linearly") {
    const BasisConfig c = baseline_basis(2, true, 3, 2);
    REQUIRE(c.max_power.size() == 4);
    CHECK(c.max_power[0] == 1);
    CHECK(c.max_power[1] == 1);
    CHECK(c.max_power[2] == 3);
}

}
