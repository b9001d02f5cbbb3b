#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"

#include "desert/basis.hpp"
#include "desert/data.hpp"
#include "desert/error.hpp"
#include "desert/identify.hpp"
#include "desert/regress.hpp"
#include "desert/sensitivity.hpp"
#include "desert/serialize.hpp"
#include "desert/sievemle.hpp"
#include "desert/simulate.hpp"
#include "desert/theta.hpp"

namespace desert::cli {

namespace fs = std::filesystem;

namespace {

// Warnings collected while a command runs; any entry maps to exit code 1.
struct Outcome {
    std::vector<std::string> warnings;
    void warn(const std::string& w) { warnings.push_back(w); }
    void warn_all(const std::vector<std::string>& ws) {
        warnings.insert(warnings.end(), ws.begin(), ws.end());
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

template <class T>
void take(const Json& j, const char* key, T& dst) {
    if (j.contains(key) && !j[key].is_null()) dst = j[key].get<T>();
}

template <class T>
void take(const Json& j, const char* key, std::optional<T>& dst) {
    if (j.contains(key) && !j[key].is_null()) dst = j[key].get<T>();
}

// Keys mirror the long flag names with '-' replaced by '_'.
void apply_config_file(const std::string& path, RunConfig& c) {
    const Json j = read_json(path);
    if (!j.is_object()) throw ParseError("config '" + path + "' must hold a JSON object", 0);
    try {
        take(j, "input", c.input);
        take(j, "schema", c.schema);
        take(j, "model", c.model);
        take(j, "out_dir", c.out_dir);
        take(j, "basis_family", c.basis_family);
        take(j, "basis_degree", c.basis_degree);
        take(j, "interaction_order", c.interaction_order);
        take(j, "knots", c.knots);
        take(j, "variant", c.variant);
        take(j, "kappa", c.kappa);
        take(j, "delta", c.delta);
        take(j, "zeta", c.zeta);
        take(j, "grid", c.grid);
        take(j, "method", c.method);
        take(j, "level", c.level);
        take(j, "boot", c.boot);
        take(j, "crossfit", c.crossfit);
        take(j, "rate", c.rate);
        take(j, "threshold", c.threshold);
        take(j, "reps", c.reps);
        take(j, "n", c.n);
        take(j, "dgp_delta", c.dgp_delta);
        take(j, "test_size", c.test_size);
        take(j, "methods", c.methods);
        take(j, "restarts", c.restarts);
        take(j, "floor", c.floor);
        take(j, "check_tol", c.check_tol);
        take(j, "check_threshold", c.check_threshold);
        take(j, "jobs", c.jobs);
        take(j, "seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config '" + path + "': " + e.what(), 0);
    }
}

Json config_json(const RunConfig& c) {
    Json j;
    j["command"] = c.command;
    j["input"] = c.input;
    j["schema"] = c.schema;
    j["model"] = c.model;
    j["out_dir"] = c.out_dir;
    j["basis_family"] = c.basis_family;
    j["basis_degree"] = c.basis_degree;
    j["interaction_order"] = c.interaction_order;
    j["knots"] = c.knots;
    j["variant"] = c.variant;
    j["kappa"] = c.kappa;
    j["delta"] = c.delta;
    j["zeta"] = c.zeta;
    j["grid"] = c.grid;
    j["method"] = c.method;
    j["level"] = c.level;
    j["boot"] = c.boot;
    j["crossfit"] = c.crossfit;
    j["rate"] = c.rate ? Json(*c.rate) : Json(nullptr);
    j["threshold"] = c.threshold ? Json(*c.threshold) : Json(nullptr);
    j["reps"] = c.reps;
    j["n"] = c.n;
    j["dgp_delta"] = c.dgp_delta;
    j["test_size"] = c.test_size;
    j["methods"] = c.methods;
    j["restarts"] = c.restarts;
    j["floor"] = c.floor;
    j["check_tol"] = c.check_tol;
    j["check_threshold"] = c.check_threshold;
    j["jobs"] = c.jobs;
    j["seed"] = c.seed;
    return j;
}

fs::path prepare_out_dir(const RunConfig& c) {
    const fs::path dir(c.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + c.out_dir + "': " + ec.message());
    write_json((dir / "run.json").string(), config_json(c));
    return dir;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument(what);
}

Schema schema_from(const RunConfig& c) {
    Schema s;
    if (!c.schema.empty()) s = Schema::parse(c.schema);
    return s;
}

Dataset load_input(const RunConfig& c) {
    require(!c.input.empty(), "--input is required");
    return load_csv(c.input, schema_from(c));
}

BasisConfig basis_from(const RunConfig& c, std::size_t d) {
    BasisConfig b = BasisConfig::default_for(d);
    b.family = basis_family_from_string(c.basis_family);
    require(c.basis_degree >= 1, "--basis-degree must be at least 1");
    b.degree = c.basis_degree;
    if (c.interaction_order >= 0) {
        require(static_cast<std::size_t>(c.interaction_order) <= d,
                "--interaction-order exceeds the number of covariates");
        b.interaction_order = c.interaction_order;
    }
    b.knots = c.knots;
    return b;
}

std::pair<double, double> pair_of(const std::vector<double>& v, const char* flag) {
    if (v.empty()) return {0.0, 0.0};
    if (v.size() == 1) return {v[0], v[0]};
    if (v.size() == 2) return {v[0], v[1]};
    throw InvalidArgument(std::string("--") + flag + " takes one or two values");
}

SensitivityParams sensitivity_from(const RunConfig& c) {
    const Variant v = variant_from_string(c.variant);
    SensitivityParams p;
    switch (v) {
        case Variant::baseline:
            break;
        case Variant::kappa: {
            const auto [a, b] = pair_of(c.kappa, "kappa");
            p = SensitivityParams::kappa(a, b);
            break;
        }
        case Variant::delta: {
            const auto [a, b] = pair_of(c.delta, "delta");
            p = SensitivityParams::delta(a, b);
            break;
        }
        case Variant::zeta: {
            const auto [a, b] = pair_of(c.zeta, "zeta");
            p = SensitivityParams::zeta(a, b);
            break;
        }
    }
    p.validate();
    return p;
}

FitOptions fit_options_from(const RunConfig& c) {
    FitOptions o;
    require(c.restarts >= 1, "--restarts must be at least 1");
    require(c.jobs >= 1, "--jobs must be at least 1");
    o.restarts = c.restarts;
    o.c = c.floor;
    o.seed = c.seed;
    o.jobs = c.jobs;
    return o;
}

// Re-expresses `raw` on the model's scaling and covariate order; `clamped`
// marks rows with a covariate outside the training range.
Dataset align_to_model(const Dataset& raw, const FittedModel& m, std::vector<char>* clamped = nullptr) {
    std::vector<std::size_t> cols;
    for (const auto& name : m.covariate_names) {
        const auto& names = raw.covariate_names();
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw SchemaError("input lacks model covariate '" + name + "'");
        cols.push_back(static_cast<std::size_t>(it - names.begin()));
    }
    std::vector<ObservationRecord> records = raw.records();
    if (clamped) clamped->assign(records.size(), 0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& r = records[i];
        std::vector<double> x;
        x.reserve(cols.size());
        for (auto k : cols) x.push_back(r.x[k]);
        bool outside = false;
        r.x = m.scaling.apply(x, &outside);
        if (clamped) (*clamped)[i] = outside;
    }
    Dataset out(std::move(records), m.covariate_names, m.scaling, true);
    out.schema = raw.schema;
    return out;
}

// Drops the s and y columns from the schema when the file lacks them.
Schema schema_for_prediction(const RunConfig& c, const FittedModel& m) {
    Schema s = c.schema.empty() ? m.schema : Schema::parse(c.schema);
    if (s.covariates.empty()) s.covariates = m.covariate_names;
    std::ifstream in(c.input);
    if (!in) throw Error("cannot open '" + c.input + "'");
    std::string header;
    std::getline(in, header);
    const auto has = [&](const std::string& name) {
        std::stringstream ss(header);
        std::string field;
        while (std::getline(ss, field, ',')) {
            field.erase(0, field.find_first_not_of(" \t\"\xEF\xBB\xBF"));
            field.erase(field.find_last_not_of(" \t\r\"") + 1);
            if (field == name) return true;
        }
        return false;
    };
    if (!has(s.s)) s.s.clear();
    if (!has(s.y)) s.y.clear();
    return s;
}

FittedModel load_model(const RunConfig& c) {
    require(!c.model.empty(), "--model is required");
    return fitted_model_from_json(read_json(c.model));
}

std::string theta_text(const ThetaEstimate& t) {
    std::ostringstream os;
    os << "theta (" << to_string(t.method) << "): " << num(t.point);
    if (t.method != ThetaMethod::plugin)
        os << "  " << num(t.level * 100) << "% CI [" << num(t.ci_low) << ", " << num(t.ci_high)
           << "]  se " << num(t.std_error);
    os << "  n=" << t.n_used;
    if (t.excluded) os << "  excluded=" << t.excluded;
    os << '\n';
    return os.str();
}

// ---- estimate -------------------------------------------------------------

int cmd_estimate(const RunConfig& c, std::ostream& out, Outcome& oc) {
    const Dataset raw = load_input(c);
    const Dataset data = scale_covariates(raw);
    const BasisConfig basis = basis_from(c, data.dim());
    const SensitivityParams sens = sensitivity_from(c);
    const fs::path dir = prepare_out_dir(c);

    FittedModel model;
    model.covariate_names = data.covariate_names();
    model.scaling = data.scaling();
    model.schema = raw.schema;
    model.estimates = fit(data, basis, fit_options_from(c), sens);
    model.propensity = fit_propensity(data, basis);
    oc.warn_all(model.estimates.diagnostics.warnings);
    write_json((dir / "model.json").string(), to_json(model));

    const MuModel mu = fit_mu_model(data, basis);
    const ImplicationReport rep = check_testable_implications(mu, data, c.check_tol, c.check_threshold);
    write_json((dir / "implications.json").string(), to_json(rep));
    if (rep.any_flagged()) oc.warn("testable implications violated");

    const auto& e = model.estimates;
    const Eigen::MatrixXd phi = e.basis().expand_rows(data.covariates());
    std::ofstream units(dir / "units.csv");
    units << "row,s,z,y,tau0,tau1,tau,alpha,beta\n";
    std::array<std::size_t, 20> hist{};
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto xi = e.at_features(phi.row(static_cast<Eigen::Index>(i)).transpose());
        const auto& r = data[i];
        units << i + 1 << ',' << r.s << ',' << r.z << ',' << r.y << ',' << num(xi.tau0) << ','
              << num(xi.tau1) << ',' << num(r.z ? xi.tau1 : xi.tau0) << ',' << num(xi.alpha) << ','
              << num(xi.beta) << '\n';
        ++hist[std::min<std::size_t>(19, static_cast<std::size_t>(xi.alpha * 20.0))];
    }
    std::ofstream h(dir / "alpha_hist.csv");
    h << "bin_low,bin_high,count\n";
    for (std::size_t k = 0; k < hist.size(); ++k)
        h << num(k / 20.0) << ',' << num((k + 1) / 20.0) << ',' << hist[k] << '\n';

    std::ostringstream rpt;
    const auto& d = e.diagnostics;
    rpt << "observations: " << data.size() << "  covariates: " << data.dim()
        << "  basis functions: " << e.basis().size() << "  variant: " << to_string(e.variant())
        << '\n';
    rpt << "log-likelihood: " << num(d.loglik) << "  gradient: " << num(d.grad_norm)
        << "  iterations: " << d.iterations << "  restarts converged: " << d.restarts_converged
        << '/' << d.restarts_used << '\n';
    rpt << "relevance violations: " << num(d.relevance_violation) << '\n';
    if (e.variant() == Variant::baseline) rpt << theta_text(theta_plugin(e, data));
    rpt << "alpha histogram (20 bins on [0,1]):";
    for (auto n : hist) rpt << ' ' << n;
    rpt << '\n' << rep.to_text();
    for (const auto& w : oc.warnings) rpt << "warning: " << w << '\n';
    std::ofstream(dir / "report.txt") << rpt.str();
    out << rpt.str();
    return oc.warnings.empty() ? kOk : kWarnings;
}

// ---- predict --------------------------------------------------------------

int cmd_predict(const RunConfig& c, std::ostream& out, Outcome& oc) {
    const FittedModel model = load_model(c);
    require(!c.input.empty(), "--input is required");
    const Schema schema = schema_for_prediction(c, model);
    std::vector<char> outside;
    const Dataset data = align_to_model(load_csv(c.input, schema, false), model, &outside);
    const fs::path dir = prepare_out_dir(c);
    const auto& e = model.estimates;
    const auto n_outside = static_cast<std::size_t>(std::count(outside.begin(), outside.end(), 1));
    if (n_outside) oc.warn(std::to_string(n_outside) + " rows clamped into the training covariate range");

    std::vector<double> scores(data.size());
    std::size_t clipped = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        bool clip = false;
        scores[i] = predict_tau_sz(e, data[i].s, data[i].z, data[i].x, &clip);
        clipped += clip ? 1 : 0;
    }
    if (clipped) oc.warn(std::to_string(clipped) + " scores clipped to [0,1]");

    double threshold = 0.0;
    std::optional<double> rate;
    if (c.threshold) {
        threshold = *c.threshold;
    } else {
        if (c.rate) {
            rate = *c.rate;
        } else {
            require(!schema.y.empty(), "--rate or --threshold is required when the input has no outcome column");
            double ybar = 0.0;
            for (const auto& r : data.records()) ybar += r.y;
            rate = ybar / static_cast<double>(data.size());
        }
        require(*rate > 0.0 && *rate <= 1.0, "--rate must lie in (0,1]");
        threshold = threshold_preserving_rate(scores, *rate);
    }

    std::ofstream csv(dir / "predictions.csv");
    csv << "row,score,decision,clamped\n";
    std::size_t positive = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int d = scores[i] >= threshold ? 1 : 0;
        positive += static_cast<std::size_t>(d);
        csv << i + 1 << ',' << num(scores[i]) << ',' << d << ',' << int(outside[i]) << '\n';
    }
    Json j;
    j["threshold"] = threshold;
    j["target_rate"] = rate ? Json(*rate) : Json(nullptr);
    j["positive_rate"] = static_cast<double>(positive) / static_cast<double>(scores.size());
    j["n"] = scores.size();
    j["clamped_rows"] = n_outside;
    j["warnings"] = oc.warnings;
    write_json((dir / "predict.json").string(), j);
    out << "threshold " << num(threshold) << "  positive rate "
        << num(static_cast<double>(positive) / static_cast<double>(scores.size())) << "  n "
        << scores.size() << '\n';
    return oc.warnings.empty() ? kOk : kWarnings;
}

// ---- theta ----------------------------------------------------------------

int cmd_theta(const RunConfig& c, std::ostream& out, Outcome& oc) {
    const ThetaMethod method = theta_method_from_string(c.method);
    const Dataset raw = load_input(c);
    FittedModel model;
    Dataset data;
    BasisConfig basis;
    FitOptions fo = fit_options_from(c);
    if (!c.model.empty()) {
        model = load_model(c);
        data = align_to_model(raw, model);
        basis = model.estimates.basis().config();
    } else {
        data = scale_covariates(raw);
        basis = basis_from(c, data.dim());
        model.estimates = fit(data, basis, fo, sensitivity_from(c));
    }
    const fs::path dir = prepare_out_dir(c);
    const NuisanceEstimates& est = model.estimates;
    oc.warn_all(est.diagnostics.warnings);

    ThetaEstimate t;
    switch (method) {
        case ThetaMethod::plugin:
            if (est.variant() == Variant::baseline) {
                t = theta_plugin(est, data);
            } else {
                t.point = theta_plugin_variant(est, data);
                t.ci_low = t.ci_high = t.point;
                t.n_used = data.size();
            }
            t.level = c.level;
            break;
        case ThetaMethod::onestep:
            if (est.variant() != Variant::baseline)
                throw InvalidArgument("--method onestep supports the baseline variant only; use "
                                      "--method bootstrap for " + to_string(est.variant()));
            if (c.crossfit >= 2) {
                t = theta_onestep_crossfit(data, basis, fo, c.crossfit, c.seed, c.level);
            } else {
                const PropensityModel prop =
                    model.propensity ? *model.propensity : fit_propensity(data, basis);
                t = theta_onestep(est, prop, data, c.level);
            }
            break;
        case ThetaMethod::bootstrap:
            t = theta_bootstrap(est, data, basis, fo, c.boot, c.seed, c.level);
            break;
    }
    oc.warn_all(t.warnings);
    write_json((dir / "theta.json").string(), to_json(t));
    out << theta_text(t);
    for (const auto& w : oc.warnings) out << "warning: " << w << '\n';
    return oc.warnings.empty() ? kOk : kWarnings;
}

// ---- check ----------------------------------------------------------------

int cmd_check(const RunConfig& c, std::ostream& out, Outcome& oc) {
    const Dataset data = scale_covariates(load_input(c));
    const BasisConfig basis = basis_from(c, data.dim());
    const fs::path dir = prepare_out_dir(c);
    const MuModel mu = fit_mu_model(data, basis);
    const ImplicationReport rep = check_testable_implications(mu, data, c.check_tol, c.check_threshold);
    write_json((dir / "implications.json").string(), to_json(rep));
    out << rep.to_text();
    if (rep.any_flagged()) oc.warn("testable implications violated");
    return oc.warnings.empty() ? kOk : kWarnings;
}

// ---- sensitivity ----------------------------------------------------------

std::vector<SensitivityParams> parse_grid(const std::string& text, Variant v) {
    std::vector<SensitivityParams> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        double a = 0.0, b = 0.0;
        try {
            a = std::stod(item.substr(0, colon));
            b = colon == std::string::npos ? a : std::stod(item.substr(colon + 1));
        } catch (const std::exception&) {
            throw InvalidArgument("bad grid entry '" + item + "' (expected a or a:b)");
        }
        SensitivityParams p;
        p.variant = v;
        p.first = a;
        p.second = b;
        out.push_back(p);
    }
    return out;
}

int cmd_sensitivity(const RunConfig& c, std::ostream& out, Outcome& oc) {
    const Dataset data = scale_covariates(load_input(c));
    const BasisConfig basis = basis_from(c, data.dim());
    SweepSpec spec;
    spec.variant = variant_from_string(c.variant);
    require(spec.variant != Variant::baseline, "--variant must be kappa, delta or zeta for a sweep");
    spec.grid = c.grid.empty() ? default_grid(spec.variant) : parse_grid(c.grid, spec.variant);
    spec.boot = c.boot;
    spec.level = c.level;
    spec.rate = c.rate;
    const fs::path dir = prepare_out_dir(c);
    const SweepTable table = run_sweep(data, basis, fit_options_from(c), spec);
    write_sweep_csv(dir / "sweep.csv", table);
    Json meta = sweep_metadata(table);
    meta["config"] = config_json(c);
    write_json((dir / "sweep.json").string(), meta);

    out << "variant " << to_string(table.variant) << "  baseline theta "
        << num(table.baseline_theta) << "  rate " << num(table.rate) << '\n';
    out << "param0 param1 theta ci_low ci_high mean|dtau| flip_rate\n";
    for (const auto& r : table.rows) {
        out << num(r.params.first.constant) << ' ' << num(r.params.second.constant) << ' ';
        if (r.ok)
            out << num(r.theta.point) << ' ' << num(r.theta.ci_low) << ' ' << num(r.theta.ci_high)
                << ' ' << num(r.mean_abs_tau_diff) << ' ' << num(r.flip_rate) << '\n';
        else
            out << "failed: " << r.error << '\n';
        if (!r.ok) oc.warn("grid point failed: " + r.error);
    }
    return oc.warnings.empty() ? kOk : kWarnings;
}

// ---- simulate -------------------------------------------------------------

int cmd_simulate(const RunConfig& c, std::ostream& out, Outcome& oc) {
    MonteCarloConfig mc;
    mc.dgp.n = c.n;
    mc.dgp.delta = c.dgp_delta;
    mc.dgp.seed = c.seed;
    mc.reps = c.reps;
    mc.jobs = c.jobs;
    mc.test_size = c.test_size;
    mc.level = c.level;
    mc.methods.clear();
    for (const auto& m : c.methods) mc.methods.push_back(method_from_string(m));
    mc.basis = simulation_basis();
    mc.basis.degree = c.basis_degree;
    if (c.interaction_order >= 0) mc.basis.interaction_order = c.interaction_order;
    mc.basis.family = basis_family_from_string(c.basis_family);
    mc.fit = fit_options_from(c);
    require(c.reps >= 1, "--reps must be at least 1");
    const fs::path dir = prepare_out_dir(c);

    const MonteCarloSummary s = monte_carlo(mc);
    write_summary_csv(dir / "summary.csv", s);
    write_coverage_csv(dir / "coverage.csv", s);
    write_replications_csv(dir / "replications.csv", s);
    write_figure_csv(dir / "figure.csv", s);
    Json meta = monte_carlo_metadata(s);
    meta["config"] = config_json(c);
    write_json((dir / "simulate.json").string(), meta);

    out << "n " << mc.dgp.n << "  delta " << num(mc.dgp.delta) << "  reps " << s.reps
        << "  failures " << s.failures << "  true theta " << num(s.theta_true) << '\n';
    out << "method  AUC(Y*)  AUC(Y)\n";
    for (Method m : mc.methods) {
        const auto& ms = s.methods[static_cast<std::size_t>(m)];
        out << to_string(m) << "  " << num(ms.auc_ystar_mean) << "  " << num(ms.auc_y_mean) << '\n';
    }
    out << "coverage " << num(s.coverage) << "  theta bias " << num(s.theta_bias)
        << "  mean tau L2 error " << num(s.tau_l2_mean) << '\n';
    out << "runtime " << num(s.runtime_seconds) << " s\n";
    if (s.failures) oc.warn(std::to_string(s.failures) + " replications failed");
    return oc.warnings.empty() ? kOk : kWarnings;
}

void add_common(CLI::App& sub, RunConfig& c) {
    sub.add_option("--input", c.input, "CSV data file");
    sub.add_option("--schema", c.schema, "column mapping, e.g. s=race,z=quality,y=callback,x=exp");
    sub.add_option("--out-dir", c.out_dir, "directory for output files");
    sub.add_option("--basis-family", c.basis_family, "polynomial or bspline");
    sub.add_option("--basis-degree", c.basis_degree, "polynomial or spline degree");
    sub.add_option("--interaction-order", c.interaction_order, "covariates per product term");
    sub.add_option("--knots", c.knots, "interior knots per coordinate (bspline)");
    sub.add_option("--restarts", c.restarts, "optimizer restarts");
    sub.add_option("--floor", c.floor, "range floor c for fitted probabilities");
    sub.add_option("--jobs", c.jobs, "worker threads");
    sub.add_option("--seed", c.seed, "random seed");
    sub.add_option("--level", c.level, "confidence level");
}

void add_variant(CLI::App& sub, RunConfig& c) {
    sub.add_option("--variant", c.variant, "baseline, kappa, delta or zeta");
    sub.add_option("--kappa", c.kappa, "kappa0[,kappa1]")->delimiter(',');
    sub.add_option("--delta", c.delta, "delta0[,delta1]")->delimiter(',');
    sub.add_option("--zeta", c.zeta, "zeta0[,zeta1]")->delimiter(',');
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig c;
    CLI::App app{"Desert-decision estimation, inference and simulation"};
    app.require_subcommand(1);
    // Subcommands hand --config up to the main app, so it works on either side.
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with default settings");

    auto* est = app.add_subcommand("estimate", "fit the desert decision rule and mechanism");
    add_common(*est, c);
    add_variant(*est, c);
    est->add_option("--check-tol", c.check_tol, "tolerance of the implication checks");
    est->add_option("--check-threshold", c.check_threshold, "flagging fraction");

    auto* pred = app.add_subcommand("predict", "score new data with a fitted model");
    pred->add_option("--model", c.model, "model.json from estimate")->required();
    pred->add_option("--input", c.input, "CSV data file")->required();
    pred->add_option("--schema", c.schema, "column mapping");
    pred->add_option("--out-dir", c.out_dir, "directory for output files");
    pred->add_option("--rate", c.rate, "positive rate preserved by the threshold");
    pred->add_option("--threshold", c.threshold, "explicit score threshold");

    auto* th = app.add_subcommand("theta", "estimate the degree of unfairness");
    add_common(*th, c);
    add_variant(*th, c);
    th->add_option("--model", c.model, "reuse a fitted model");
    th->add_option("--method", c.method, "plugin, onestep or bootstrap");
    th->add_option("--boot", c.boot, "bootstrap replicates");
    th->add_option("--crossfit", c.crossfit, "cross-fitting folds for onestep (0 = off)");

    auto* chk = app.add_subcommand("check", "test the observable implications");
    add_common(*chk, c);
    chk->add_option("--check-tol", c.check_tol, "tolerance of the implication checks");
    chk->add_option("--check-threshold", c.check_threshold, "flagging fraction");

    auto* sen = app.add_subcommand("sensitivity", "sweep a sensitivity parameter grid");
    add_common(*sen, c);
    add_variant(*sen, c);
    sen->add_option("--grid", c.grid, "grid points a:b separated by commas");
    sen->add_option("--boot", c.boot, "bootstrap replicates per point (0 = plug-in only)");
    sen->add_option("--rate", c.rate, "classifier positive rate for flip rates");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo study on the synthetic design");
    add_common(*sim, c);
    sim->add_option("--reps", c.reps, "replications");
    sim->add_option("--n", c.n, "training sample size");
    sim->add_option("--dgp-delta", c.dgp_delta, "violation level of the one-sided mechanism");
    sim->add_option("--test-size", c.test_size, "test draw size");
    sim->add_option("--methods", c.methods, "subset of DSD,UML,FTU,MLC,LD")->delimiter(',');

    // Config file values are loaded first; flags parsed afterwards override them.
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];

    try {
        if (!config_path.empty()) apply_config_file(config_path, c);
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            out << app.help();
            return kOk;
        } catch (const CLI::ParseError& e) {
            err << "error: " << e.what() << '\n';
            return kError;
        }
        for (auto* sub : app.get_subcommands()) c.command = sub->get_name();
        // The command's own help was printed by CLI11 when requested.
        Outcome oc;
        int code = kOk;
        if (c.command == "estimate") code = cmd_estimate(c, out, oc);
        else if (c.command == "predict") code = cmd_predict(c, out, oc);
        else if (c.command == "theta") code = cmd_theta(c, out, oc);
        else if (c.command == "check") code = cmd_check(c, out, oc);
        else if (c.command == "sensitivity") code = cmd_sensitivity(c, out, oc);
        else if (c.command == "simulate") code = cmd_simulate(c, out, oc);
        for (const auto& w : oc.warnings) err << "warning: " << w << '\n';
        return code;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

}  // namespace desert::cli
