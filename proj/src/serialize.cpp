#include "desert/serialize.hpp"

#include <fstream>

#include "desert/error.hpp"

namespace desert {

namespace {

Json vector_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd vector_from_json(const Json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed ") + what + ": " + e.what(), 0);
    }
}

}  // namespace

Json to_json(const BasisConfig& c) {
    Json j;
    j["family"] = to_string(c.family);
    j["degree"] = c.degree;
    j["interaction_order"] = c.interaction_order;
    j["include_intercept"] = c.include_intercept;
    j["knots"] = c.knots;
    j["max_power"] = c.max_power;
    return j;
}

BasisConfig basis_config_from_json(const Json& j) {
    return guarded("basis", [&] {
        BasisConfig c;
        c.family = basis_family_from_string(j.value("family", std::string("polynomial")));
        c.degree = j.value("degree", c.degree);
        c.interaction_order = j.value("interaction_order", c.interaction_order);
        c.include_intercept = j.value("include_intercept", c.include_intercept);
        c.knots = j.value("knots", c.knots);
        if (j.contains("max_power")) c.max_power = j["max_power"].get<std::vector<int>>();
        return c;
    });
}

Json to_json(const SensitivityFunction& f) {
    if (f.is_constant()) return f.constant;
    Json j;
    j["grid"] = f.grid;
    j["values"] = f.values;
    return j;
}

SensitivityFunction sensitivity_function_from_json(const Json& j) {
    return guarded("sensitivity function", [&] {
        SensitivityFunction f;
        if (j.is_number()) {
            f.constant = j.get<double>();
        } else {
            f.grid = j.at("grid").get<std::vector<std::vector<double>>>();
            f.values = j.at("values").get<std::vector<double>>();
        }
        return f;
    });
}

Json to_json(const SensitivityParams& p) {
    Json j;
    j["variant"] = to_string(p.variant);
    j["first"] = to_json(p.first);
    j["second"] = to_json(p.second);
    return j;
}

SensitivityParams sensitivity_params_from_json(const Json& j) {
    return guarded("sensitivity", [&] {
        SensitivityParams p;
        p.variant = variant_from_string(j.value("variant", std::string("baseline")));
        if (j.contains("first")) p.first = sensitivity_function_from_json(j["first"]);
        if (j.contains("second")) p.second = sensitivity_function_from_json(j["second"]);
        p.validate();
        return p;
    });
}

Json to_json(const FitDiagnostics& d) {
    Json j;
    j["loglik"] = d.loglik;
    j["criterion"] = d.criterion;
    j["grad_norm"] = d.grad_norm;
    j["iterations"] = d.iterations;
    j["restarts_used"] = d.restarts_used;
    j["restarts_converged"] = d.restarts_converged;
    j["best_restart"] = d.best_restart;
    j["relevance_violation"] = d.relevance_violation;
    j["warnings"] = d.warnings;
    return j;
}

Json to_json(const ThetaEstimate& t) {
    Json j;
    j["method"] = to_string(t.method);
    j["point"] = t.point;
    j["std_error"] = t.std_error;
    j["ci_low"] = t.ci_low;
    j["ci_high"] = t.ci_high;
    j["level"] = t.level;
    j["n_used"] = t.n_used;
    j["excluded"] = t.excluded;
    j["out_of_range"] = t.out_of_range;
    if (t.method == ThetaMethod::bootstrap) {
        j["replicates"] = t.replicates;
        j["failures"] = t.failures;
    }
    j["warnings"] = t.warnings;
    return j;
}

Json to_json(const ImplicationReport& r) {
    static const char* names[3] = {"advantaged_not_below_disadvantaged", "auxiliary_relevant",
                                   "auxiliary_effect_same_sign"};
    Json j;
    j["n"] = r.n;
    j["tol"] = r.tol;
    j["threshold"] = r.threshold;
    Json conds = Json::array();
    for (int k = 0; k < 3; ++k) {
        Json c;
        c["condition"] = names[k];
        c["violation_fraction"] = r.violation_fraction[static_cast<std::size_t>(k)];
        c["flagged"] = r.flagged[static_cast<std::size_t>(k)];
        conds.push_back(c);
    }
    j["conditions"] = conds;
    j["any_flagged"] = r.any_flagged();
    return j;
}

Json to_json(const FittedModel& m) {
    const auto& e = m.estimates;
    Json j;
    j["format"] = "desert-model";
    j["version"] = 1;
    j["covariate_names"] = m.covariate_names;
    Json scaling = Json::array();
    for (const auto& r : m.scaling.ranges) scaling.push_back({{"min", r.min}, {"max", r.max}});
    j["scaling"] = scaling;
    j["schema"] = {{"s", m.schema.s}, {"z", m.schema.z}, {"y", m.schema.y}};
    j["basis"] = to_json(e.basis().config());
    j["floor"] = e.tau0.floor;
    j["variant"] = to_string(e.variant());
    j["sensitivity"] = to_json(e.sensitivity);
    j["coefficients"] = {{"tau0", vector_json(e.tau0.gamma)},
                         {"tau1", vector_json(e.tau1.gamma)},
                         {"alpha", vector_json(e.alpha.gamma)},
                         {"beta", vector_json(e.beta.gamma)}};
    j["diagnostics"] = to_json(e.diagnostics);
    if (m.propensity) {
        const auto& p = *m.propensity;
        Json pj;
        pj["basis"] = to_json(p.basis.config());
        pj["floor"] = p.floor;
        Json cols = Json::array();
        for (Eigen::Index k = 0; k < p.coef.cols(); ++k) cols.push_back(vector_json(p.coef.col(k)));
        pj["coefficients"] = cols;
        j["propensity"] = pj;
    }
    return j;
}

FittedModel fitted_model_from_json(const Json& j) {
    return guarded("model", [&] {
        FittedModel m;
        m.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
        for (const auto& r : j.at("scaling"))
            m.scaling.ranges.push_back({r.at("min").get<double>(), r.at("max").get<double>()});
        if (m.scaling.ranges.size() != m.covariate_names.size())
            throw DimensionError("model scaling does not match its covariate names");
        if (j.contains("schema")) {
            const auto& s = j["schema"];
            m.schema.s = s.value("s", m.schema.s);
            m.schema.z = s.value("z", m.schema.z);
            m.schema.y = s.value("y", m.schema.y);
        }
        m.schema.covariates = m.covariate_names;
        const Basis basis(basis_config_from_json(j.at("basis")), m.covariate_names.size());
        const auto& c = j.at("coefficients");
        const auto t0 = vector_from_json(c.at("tau0"));
        const auto t1 = vector_from_json(c.at("tau1"));
        const auto a = vector_from_json(c.at("alpha"));
        const auto b = vector_from_json(c.at("beta"));
        Eigen::VectorXd packed(t0.size() * 4);
        if (t1.size() != t0.size() || a.size() != t0.size() || b.size() != t0.size())
            throw DimensionError("model coefficient vectors differ in length");
        packed << t0, t1, a, b;
        SensitivityParams sens;
        if (j.contains("sensitivity")) sens = sensitivity_params_from_json(j["sensitivity"]);
        m.estimates = NuisanceEstimates::from_packed(basis, packed, j.value("floor", 0.001), sens);
        if (j.contains("diagnostics")) {
            const auto& d = j["diagnostics"];
            auto& out = m.estimates.diagnostics;
            out.loglik = d.value("loglik", 0.0);
            out.criterion = d.value("criterion", 0.0);
            out.grad_norm = d.value("grad_norm", 0.0);
            out.iterations = d.value("iterations", 0);
            out.restarts_used = d.value("restarts_used", 0);
            out.restarts_converged = d.value("restarts_converged", 0);
            out.best_restart = d.value("best_restart", -1);
            out.relevance_violation = d.value("relevance_violation", 0.0);
            out.warnings = d.value("warnings", std::vector<std::string>{});
        }
        if (j.contains("propensity")) {
            const auto& pj = j["propensity"];
            PropensityModel p;
            p.basis = Basis(basis_config_from_json(pj.at("basis")), m.covariate_names.size());
            p.floor = pj.value("floor", 0.01);
            const auto& cols = pj.at("coefficients");
            p.coef.resize(static_cast<Eigen::Index>(p.basis.size()), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const auto v = vector_from_json(cols[k]);
                if (v.size() != p.coef.rows())
                    throw DimensionError("propensity coefficients do not match the basis");
                p.coef.col(static_cast<Eigen::Index>(k)) = v;
            }
            m.propensity = p;
        }
        return m;
    });
}

Json sweep_metadata(const SweepTable& t) {
    Json j;
    j["variant"] = to_string(t.variant);
    j["rate"] = t.rate;
    j["baseline"] = to_json(t.baseline);
    j["baseline_theta"] = t.baseline_theta;
    j["points"] = t.rows.size();
    std::size_t failed = 0;
    for (const auto& r : t.rows) failed += r.ok ? 0 : 1;
    j["failed_points"] = failed;
    return j;
}

Json monte_carlo_metadata(const MonteCarloSummary& s) {
    Json j;
    const auto& c = s.config;
    j["n"] = c.dgp.n;
    j["delta"] = c.dgp.delta;
    j["seed"] = c.dgp.seed;
    j["reps"] = c.reps;
    j["test_size"] = c.test_size;
    j["basis"] = to_json(c.basis);
    j["restarts"] = c.fit.restarts;
    j["level"] = c.level;
    Json methods = Json::array();
    for (Method m : c.methods) methods.push_back(to_string(m));
    j["methods"] = methods;
    j["baseline_reconstructions"] = "MLC and LD are indicative reconstructions";
    j["theta_true"] = s.theta_true;
    j["failures"] = s.failures;
    j["coverage"] = s.coverage;
    j["theta_bias"] = s.theta_bias;
    j["tau_l2_mean"] = s.tau_l2_mean;
    return j;
}

Json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid JSON in '") + path + "': " + e.what(), 0);
    }
}

void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace desert
