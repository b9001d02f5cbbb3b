#include "desert/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "desert/error.hpp"

namespace desert {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string describe(const SensitivityFunction& f) {
    return f.is_constant() ? num(f.constant) : "table";
}

}  // namespace

void SweepSpec::validate() const {
    if (grid.empty()) throw InvalidArgument("sensitivity grid is empty");
    for (const auto& p : grid) {
        if (p.variant != variant)
            throw InvalidArgument("grid point variant " + to_string(p.variant) +
                                  " does not match sweep variant " + to_string(variant));
        p.validate();
    }
    if (boot != 0 && boot < 200) throw InvalidArgument("bootstrap replicates must be 0 or >= 200");
    if (rate && !(*rate > 0.0 && *rate < 1.0)) throw InvalidArgument("rate must lie in (0,1)");
}

std::vector<SensitivityParams> default_grid(Variant variant) {
    std::vector<SensitivityParams> out;
    switch (variant) {
        case Variant::baseline:
            out.push_back(SensitivityParams::baseline());
            break;
        case Variant::delta:
            for (double v : {0.0, 0.025, 0.05, 0.1}) out.push_back(SensitivityParams::delta(v, v));
            break;
        case Variant::zeta:
            for (double v : {0.0, 0.025, 0.05, 0.1}) out.push_back(SensitivityParams::zeta(v, v));
            break;
        case Variant::kappa:
            for (double a : {-0.05, 0.0, 0.05})
                for (double b : {-0.05, 0.0, 0.05}) out.push_back(SensitivityParams::kappa(a, b));
            break;
    }
    return out;
}

double flip_rate(const std::vector<double>& a, const std::vector<double>& b, double rate) {
    if (a.size() != b.size()) throw DimensionError("score vectors differ in length");
    if (a.empty()) return 0.0;
    const double ta = threshold_preserving_rate(a, rate);
    const double tb = threshold_preserving_rate(b, rate);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if ((a[i] >= ta) != (b[i] >= tb)) ++flips;
    return static_cast<double>(flips) / static_cast<double>(a.size());
}

SweepTable run_sweep(const Dataset& input, const BasisConfig& basis, const FitOptions& options,
                     const SweepSpec& spec) {
    spec.validate();
    const Dataset data = scale_covariates(input);

    SweepTable table;
    table.variant = spec.variant;
    if (spec.rate) {
        table.rate = *spec.rate;
    } else {
        double ybar = 0.0;
        for (const auto& r : data.records()) ybar += r.y;
        table.rate = ybar / static_cast<double>(data.size());
    }

    const NuisanceEstimates base = fit(data, basis, options);
    table.baseline = base.diagnostics;
    table.baseline_theta = theta_plugin(base, data).point;
    const std::vector<double> base_scores = tau_scores(base, data);

    // Lexicographic traversal so warm starts move between neighbours.
    std::vector<std::size_t> order(spec.grid.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        const auto& a = spec.grid[i];
        const auto& b = spec.grid[j];
        const double ka[2] = {a.first.min_value(), a.second.min_value()};
        const double kb[2] = {b.first.min_value(), b.second.min_value()};
        return std::lexicographical_compare(ka, ka + 2, kb, kb + 2);
    });

    // Cold-start verification on an evenly spread ~10% subset of the traversal.
    const std::size_t m = order.size();
    const auto n_cold = static_cast<std::size_t>(
        std::ceil(spec.cold_check_fraction * static_cast<double>(m) - 1e-9));
    std::vector<bool> cold(m, false);
    if (spec.reuse_warm_start)
        for (std::size_t k = 0; k < n_cold; ++k) cold[(k * m) / std::max<std::size_t>(n_cold, 1)] = true;

    table.rows.resize(m);
    const NuisanceEstimates* warm = &base;
    NuisanceEstimates previous;
    for (std::size_t step = 0; step < m; ++step) {
        const std::size_t idx = order[step];
        SweepRow& row = table.rows[idx];
        row.params = spec.grid[idx];
        try {
            NuisanceEstimates est;
            if (spec.reuse_warm_start) {
                FitOptions warm_opt = options;
                warm_opt.restarts = 1;
                est = fit(data, basis, warm_opt, row.params, warm);
                if (cold[step]) {
                    row.cold_checked = true;
                    NuisanceEstimates cold_est = fit(data, basis, options, row.params);
                    if (cold_est.diagnostics.criterion < est.diagnostics.criterion - 1e-6) {
                        row.cold_improved = true;
                        est = std::move(cold_est);
                    }
                }
            } else {
                est = fit(data, basis, options, row.params);
            }
            row.diagnostics = est.diagnostics;

            if (spec.boot > 0) {
                row.theta = theta_bootstrap(est, data, basis, options, spec.boot,
                                            options.seed + idx + 1, spec.level);
            } else {
                row.theta.method = ThetaMethod::plugin;
                row.theta.level = spec.level;
                row.theta.point = theta_plugin_variant(est, data);
                row.theta.ci_low = row.theta.ci_high = row.theta.point;
                row.theta.n_used = data.size();
            }

            const std::vector<double> scores = tau_scores(est, data);
            double diff = 0.0;
            for (std::size_t i = 0; i < scores.size(); ++i) diff += std::abs(scores[i] - base_scores[i]);
            row.mean_abs_tau_diff = diff / static_cast<double>(scores.size());
            row.flip_rate = flip_rate(scores, base_scores, table.rate);
            row.ok = true;
            previous = std::move(est);
            warm = &previous;
        } catch (const Error& e) {
            row.ok = false;
            row.error = e.what();
        }
    }
    return table;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepTable& table) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "variant,param0,param1,ok,theta,ci_low,ci_high,std_error,mean_abs_tau_diff,flip_rate,"
           "loglik,criterion,grad_norm,relevance_violation,cold_checked,cold_improved,error\n";
    for (const auto& r : table.rows) {
        out << to_string(table.variant) << ',' << describe(r.params.first) << ','
            << describe(r.params.second) << ',' << (r.ok ? 1 : 0) << ',';
        if (r.ok) {
            out << num(r.theta.point) << ',' << num(r.theta.ci_low) << ',' << num(r.theta.ci_high)
                << ',' << num(r.theta.std_error) << ',' << num(r.mean_abs_tau_diff) << ','
                << num(r.flip_rate) << ',' << num(r.diagnostics.loglik) << ','
                << num(r.diagnostics.criterion) << ',' << num(r.diagnostics.grad_norm) << ','
                << num(r.diagnostics.relevance_violation) << ',';
        } else {
            out << ",,,,,,,,,,";
        }
        std::string err = r.error;
        std::replace(err.begin(), err.end(), '"', '\'');
        out << (r.cold_checked ? 1 : 0) << ',' << (r.cold_improved ? 1 : 0) << ",\"" << err
            << "\"\n";
    }
}

}  // namespace desert
