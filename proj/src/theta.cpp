#include "desert/theta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "desert/error.hpp"
#include "desert/parallel.hpp"

namespace desert {

namespace {

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0,1)");
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    if (v.empty()) return m;
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (double x : v) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(v.size());
    return m;
}

// Empirical quantile with linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.size() == 1) return sorted.front();
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::string to_string(ThetaMethod m) {
    switch (m) {
        case ThetaMethod::plugin: return "plugin";
        case ThetaMethod::onestep: return "onestep";
        case ThetaMethod::bootstrap: return "bootstrap";
    }
    return "plugin";
}

ThetaMethod theta_method_from_string(const std::string& s) {
    if (s == "plugin") return ThetaMethod::plugin;
    if (s == "onestep") return ThetaMethod::onestep;
    if (s == "bootstrap") return ThetaMethod::bootstrap;
    throw InvalidArgument("unknown method '" + s + "' (expected plugin, onestep or bootstrap)");
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double theta_integrand(const PointwiseParams& xi, int s, int z) {
    const double tau = z == 0 ? xi.tau0 : xi.tau1;
    return s == 0 ? tau * xi.alpha : (1.0 - tau) * xi.beta;
}

ThetaEstimate theta_plugin(const NuisanceEstimates& est, const Dataset& input) {
    if (est.variant() != Variant::baseline)
        throw InvalidArgument("theta_plugin needs baseline estimates; use the bootstrap for the " +
                              to_string(est.variant()) + " variant");
    if (input.empty()) throw EmptyDataError("no observations");
    const Dataset data = scale_covariates(input);
    const Eigen::MatrixXd phi = est.basis().expand_rows(data.covariates());
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto xi = est.at_features(phi.row(static_cast<Eigen::Index>(i)).transpose());
        sum += theta_integrand(xi, data[i].s, data[i].z);
    }
    ThetaEstimate out;
    out.method = ThetaMethod::plugin;
    out.point = sum / static_cast<double>(data.size());
    out.ci_low = out.ci_high = out.point;
    out.n_used = data.size();
    return out;
}

double theta_plugin_variant(const NuisanceEstimates& est, const Dataset& input) {
    if (input.empty()) throw EmptyDataError("no observations");
    const Dataset data = scale_covariates(input);
    const Eigen::MatrixXd phi = est.basis().expand_rows(data.covariates());
    const auto& sens = est.sensitivity;
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data[i];
        const auto xi = est.at_features(phi.row(static_cast<Eigen::Index>(i)).transpose());
        const double tau = r.z == 0 ? xi.tau0 : xi.tau1;
        switch (est.variant()) {
            case Variant::baseline:
                sum += theta_integrand(xi, r.s, r.z);
                break;
            case Variant::kappa: {
                if (r.s == 0) {
                    sum += tau * xi.alpha;
                } else {
                    const double k = r.z == 0 ? sens.first.at(r.x) : sens.second.at(r.x);
                    sum += (1.0 - std::clamp(tau + k, 0.0, 1.0)) * xi.beta;
                }
                break;
            }
            case Variant::delta:
                if (r.s == 0)
                    sum += tau * xi.alpha + (1.0 - tau) * sens.first.at(r.x);
                else
                    sum += (1.0 - tau) * xi.beta + tau * sens.second.at(r.x);
                break;
            case Variant::zeta:
                if (r.s == 0) {
                    const double k = r.z == 0 ? 1.0 : 1.0 + sens.first.at(r.x);
                    sum += tau * (1.0 - k * (1.0 - xi.alpha));
                } else {
                    const double k = r.z == 0 ? 1.0 : 1.0 + sens.second.at(r.x);
                    sum += (1.0 - tau) * (1.0 - k * (1.0 - xi.beta));
                }
                break;
        }
    }
    return sum / static_cast<double>(data.size());
}

std::array<double, 4> influence_coefficients(const PointwiseParams& xi,
                                             const std::array<double, 4>& pi) {
    const PointwiseMu mu = forward_mu(xi);
    const Eigen::Matrix4d jac = identification_jacobian(mu);
    // dm / d(tau0, tau1, alpha, beta)
    Eigen::Vector4d dm;
    dm(0) = pi[0] * xi.alpha - pi[2] * xi.beta;
    dm(1) = pi[1] * xi.alpha - pi[3] * xi.beta;
    dm(2) = pi[0] * xi.tau0 + pi[1] * xi.tau1;
    dm(3) = pi[2] * (1.0 - xi.tau0) + pi[3] * (1.0 - xi.tau1);
    const Eigen::Vector4d dmu = jac.transpose() * dm;
    std::array<double, 4> c{};
    for (int k = 0; k < 4; ++k) {
        if (!(pi[static_cast<std::size_t>(k)] > 0.0))
            throw PositivityError("propensity must be positive in every stratum");
        c[static_cast<std::size_t>(k)] = dmu(k) / pi[static_cast<std::size_t>(k)];
    }
    return c;
}

ThetaEstimate theta_onestep_values(const Dataset& data, const std::vector<PointwiseParams>& xi,
                                   const std::vector<std::array<double, 4>>& pi, double level,
                                   double trim) {
    check_level(level);
    if (!(trim >= 0.0)) throw InvalidArgument("trim must be non-negative");
    const std::size_t n = data.size();
    if (n == 0) throw EmptyDataError("no observations");
    if (xi.size() != n || pi.size() != n)
        throw DimensionError("nuisance values do not match the number of observations");

    std::vector<double> phi(n);
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = data[i];
        const int k = stratum_class(r.s, r.z);
        double aug = 0.0;
        if (std::abs(xi[i].tau1 - xi[i].tau0) < trim) {
            phi[i] = theta_integrand(xi[i], r.s, r.z);
            ++excluded;
            continue;
        }
        try {
            const auto c = influence_coefficients(xi[i], pi[i]);
            const double mu = forward_mu(xi[i]).at(r.s, r.z);
            aug = c[static_cast<std::size_t>(k)] * (r.y - mu);
            if (!std::isfinite(aug)) throw WeakAuxiliaryError("non-finite augmentation");
        } catch (const WeakAuxiliaryError&) {
            aug = 0.0;
            ++excluded;
        } catch (const InvalidIdentificationError&) {
            aug = 0.0;
            ++excluded;
        }
        phi[i] = theta_integrand(xi[i], r.s, r.z) + aug;
    }

    const Moments m = moments(phi);
    ThetaEstimate out;
    out.method = ThetaMethod::onestep;
    out.level = level;
    out.point = m.mean;
    out.std_error = std::sqrt(m.var / static_cast<double>(n));
    const double q = normal_quantile(0.5 + 0.5 * level);
    out.ci_low = out.point - q * out.std_error;
    out.ci_high = out.point + q * out.std_error;
    out.n_used = n;
    out.excluded = excluded;
    out.out_of_range = out.point < 0.0 || out.point > 1.0;
    if (static_cast<double>(excluded) > 0.05 * static_cast<double>(n))
        out.warnings.push_back(std::to_string(excluded) + " of " + std::to_string(n) +
                               " observations excluded from the augmentation (weak auxiliary "
                               "variable or degenerate identification)");
    if (out.out_of_range) out.warnings.push_back("one-step estimate lies outside [0,1]");
    return out;
}

namespace {

void collect_values(const NuisanceEstimates& est, const PropensityModel& prop, const Dataset& data,
                    std::vector<PointwiseParams>& xi, std::vector<std::array<double, 4>>& pi) {
    const Eigen::MatrixXd x = data.covariates();
    const Eigen::MatrixXd phi_est = est.basis().expand_rows(x);
    const Eigen::MatrixXd phi_prop = prop.basis.expand_rows(x);
    xi.resize(data.size());
    pi.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        xi[i] = est.at_features(phi_est.row(row).transpose());
        pi[i] = prop.probs(phi_prop.row(row).transpose());
    }
}

}  // namespace

ThetaEstimate theta_onestep(const NuisanceEstimates& est, const PropensityModel& prop,
                            const Dataset& input, double level, double trim) {
    if (est.variant() != Variant::baseline)
        throw InvalidArgument("the one-step estimator needs baseline estimates; use the bootstrap "
                              "for the " + to_string(est.variant()) + " variant");
    const Dataset data = scale_covariates(input);
    std::vector<PointwiseParams> xi;
    std::vector<std::array<double, 4>> pi;
    collect_values(est, prop, data, xi, pi);
    ThetaEstimate out = theta_onestep_values(data, xi, pi, level, trim);
    for (const auto& w : est.diagnostics.warnings) out.warnings.push_back(w);
    return out;
}

ThetaEstimate theta_onestep_crossfit(const Dataset& input, const BasisConfig& basis,
                                     const FitOptions& options, int folds, std::uint64_t seed,
                                     double level, double trim) {
    if (folds < 2) throw InvalidArgument("cross-fitting needs at least 2 folds");
    const Dataset data = scale_covariates(input);
    const std::size_t n = data.size();
    if (n < static_cast<std::size_t>(folds)) throw InvalidArgument("fewer observations than folds");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0xF01D));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(n);
    for (std::size_t k = 0; k < n; ++k) fold_of[order[k]] = static_cast<int>(k % folds);

    std::vector<PointwiseParams> xi(n);
    std::vector<std::array<double, 4>> pi(n);
    std::vector<std::string> warnings;
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);
        const Dataset tr = data.subset(train);
        const Dataset te = data.subset(test);
        FitOptions fo = options;
        fo.seed = derive_seed(options.seed, static_cast<std::uint64_t>(f) + 1);
        const NuisanceEstimates est = fit(tr, basis, fo);
        const PropensityModel prop = fit_propensity(tr, basis);
        std::vector<PointwiseParams> fxi;
        std::vector<std::array<double, 4>> fpi;
        collect_values(est, prop, te, fxi, fpi);
        for (std::size_t k = 0; k < test.size(); ++k) {
            xi[test[k]] = fxi[k];
            pi[test[k]] = fpi[k];
        }
        for (const auto& w : est.diagnostics.warnings)
            warnings.push_back("fold " + std::to_string(f) + ": " + w);
    }
    ThetaEstimate out = theta_onestep_values(data, xi, pi, level, trim);
    out.warnings.insert(out.warnings.end(), warnings.begin(), warnings.end());
    return out;
}

ThetaEstimate theta_bootstrap(const Fitter& fitter, const NuisanceEstimates& full,
                              const Dataset& input, int replicates, std::uint64_t seed,
                              double level, int jobs) {
    check_level(level);
    if (replicates < 200) throw InvalidArgument("the bootstrap needs at least 200 replicates");
    const Dataset data = scale_covariates(input);
    const std::size_t n = data.size();
    if (n == 0) throw EmptyDataError("no observations");

    std::vector<double> draws(static_cast<std::size_t>(replicates),
                              std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> errors(static_cast<std::size_t>(replicates));
    parallel_for(static_cast<std::size_t>(replicates), jobs, [&](std::size_t b) {
        const std::uint64_t sub = derive_seed(seed, b);
        std::mt19937_64 rng(sub);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> rows(n);
        for (auto& r : rows) r = pick(rng);
        try {
            const Dataset resample = data.subset(rows);
            const NuisanceEstimates est = fitter(resample, sub);
            draws[b] = theta_plugin_variant(est, resample);
        } catch (const Error& e) {
            errors[b] = e.what();
        }
    });

    std::vector<double> ok;
    std::string first_error;
    for (std::size_t b = 0; b < draws.size(); ++b) {
        if (std::isfinite(draws[b]))
            ok.push_back(draws[b]);
        else if (first_error.empty())
            first_error = errors[b].empty() ? "non-finite estimate" : errors[b];
    }
    const int failures = replicates - static_cast<int>(ok.size());
    if (failures * 10 > replicates)
        throw ConvergenceError("bootstrap: " + std::to_string(failures) + " of " +
                               std::to_string(replicates) + " refits failed (first: " +
                               first_error + ")");

    ThetaEstimate out;
    out.method = ThetaMethod::bootstrap;
    out.level = level;
    out.point = theta_plugin_variant(full, data);
    out.n_used = n;
    out.replicates = replicates;
    out.failures = failures;
    out.std_error = std::sqrt(moments(ok).var);
    std::sort(ok.begin(), ok.end());
    // The percentile interval is widened, if needed, to contain the point.
    out.ci_low = std::min(quantile_sorted(ok, 0.5 - 0.5 * level), out.point);
    out.ci_high = std::max(quantile_sorted(ok, 0.5 + 0.5 * level), out.point);
    if (failures > 0)
        out.warnings.push_back(std::to_string(failures) + " bootstrap refits failed");
    return out;
}

ThetaEstimate theta_bootstrap(const NuisanceEstimates& full, const Dataset& data,
                              const BasisConfig& basis, const FitOptions& options, int replicates,
                              std::uint64_t seed, double level) {
    FitOptions inner = options;
    inner.restarts = 1;
    inner.jobs = 1;
    const Fitter fitter = [&](const Dataset& d, std::uint64_t sub) {
        FitOptions o = inner;
        o.seed = sub;
        return fit(d, basis, o, full.sensitivity, &full);
    };
    return theta_bootstrap(fitter, full, data, replicates, seed, level, options.jobs);
}

}  // namespace desert
