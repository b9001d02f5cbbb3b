#include "desert/sievemle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "desert/error.hpp"
#include "desert/optim.hpp"
#include "desert/parallel.hpp"

namespace desert {

namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p, bool* clamped) {
    if (p < kProbClamp) {
        *clamped = true;
        return kProbClamp;
    }
    if (p > 1.0 - kProbClamp) {
        *clamped = true;
        return 1.0 - kProbClamp;
    }
    *clamped = false;
    return p;
}

double logit_floor(double v, double c) {
    // Inverse of v = c + (1 - 2c) expit(t), after keeping v strictly inside.
    const double lo = c + 1e-6;
    const double hi = 1.0 - c - 1e-6;
    v = std::clamp(v, lo, hi);
    return logit((v - c) / (1.0 - 2.0 * c));
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::kappa: return "kappa";
        case Variant::delta: return "delta";
        case Variant::zeta: return "zeta";
    }
    return "baseline";
}

Variant variant_from_string(const std::string& s) {
    if (s == "baseline") return Variant::baseline;
    if (s == "kappa") return Variant::kappa;
    if (s == "delta") return Variant::delta;
    if (s == "zeta") return Variant::zeta;
    throw InvalidArgument("unknown variant '" + s + "' (expected baseline, kappa, delta or zeta)");
}

double SensitivityFunction::at(const std::vector<double>& x) const {
    if (grid.empty()) return constant;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double d = 0.0;
        const std::size_t m = std::min(grid[k].size(), x.size());
        for (std::size_t j = 0; j < m; ++j) d += (grid[k][j] - x[j]) * (grid[k][j] - x[j]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return values[best];
}

double SensitivityFunction::min_value() const {
    if (grid.empty()) return constant;
    return *std::min_element(values.begin(), values.end());
}

double SensitivityFunction::max_value() const {
    if (grid.empty()) return constant;
    return *std::max_element(values.begin(), values.end());
}

void SensitivityParams::validate() const {
    for (const auto* f : {&first, &second}) {
        if (f->grid.size() != f->values.size())
            throw InvalidArgument("sensitivity table has mismatched grid and value counts");
        if (!f->grid.empty()) {
            const auto d = f->grid.front().size();
            for (const auto& g : f->grid)
                if (g.size() != d) throw InvalidArgument("sensitivity table rows differ in length");
        }
        const double lo = f->min_value();
        const double hi = f->max_value();
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw InvalidArgument("sensitivity parameter is not finite");
        switch (variant) {
            case Variant::baseline:
                break;
            case Variant::kappa:
                if (lo <= -1.0 || hi >= 1.0)
                    throw InvalidArgument("kappa must lie in (-1, 1)");
                break;
            case Variant::delta:
                if (lo < 0.0 || hi >= 1.0) throw InvalidArgument("delta must lie in [0, 1)");
                break;
            case Variant::zeta:
                if (lo <= -1.0) throw InvalidArgument("zeta must exceed -1");
                break;
        }
    }
}

bool SensitivityParams::is_zero() const {
    return first.min_value() == 0.0 && first.max_value() == 0.0 && second.min_value() == 0.0 &&
           second.max_value() == 0.0;
}

PointwiseParams NuisanceEstimates::at(const std::vector<double>& x) const {
    return at_features(tau0.basis.expand(x));
}

PointwiseParams NuisanceEstimates::at_features(const Eigen::Ref<const Eigen::VectorXd>& phi) const {
    return {tau0.eval_features(phi), tau1.eval_features(phi), alpha.eval_features(phi),
            beta.eval_features(phi)};
}

Eigen::VectorXd NuisanceEstimates::packed() const {
    const auto j = tau0.gamma.size();
    Eigen::VectorXd out(4 * j);
    out << tau0.gamma, tau1.gamma, alpha.gamma, beta.gamma;
    return out;
}

NuisanceEstimates NuisanceEstimates::from_packed(const Basis& basis, const Eigen::VectorXd& packed,
                                                 double c, SensitivityParams sens) {
    const auto j = static_cast<Eigen::Index>(basis.size());
    if (packed.size() != 4 * j)
        throw DimensionError("packed coefficient vector has length " +
                             std::to_string(packed.size()) + ", expected " + std::to_string(4 * j));
    NuisanceEstimates est;
    est.tau0 = {basis, packed.segment(0, j), c};
    est.tau1 = {basis, packed.segment(j, j), c};
    est.alpha = {basis, packed.segment(2 * j, j), c};
    est.beta = {basis, packed.segment(3 * j, j), c};
    est.sensitivity = std::move(sens);
    return est;
}

ModelProb model_prob_grad(const PointwiseParams& xi, int s, int z, Variant variant, double sens0,
                          double sens1) {
    const double tau = z == 0 ? xi.tau0 : xi.tau1;
    ModelProb out;
    double p = 0.0;
    switch (variant) {
        case Variant::baseline:
            if (s == 0) {
                p = tau * (1.0 - xi.alpha);
                out.d_tau = 1.0 - xi.alpha;
                out.d_alpha = -tau;
            } else {
                p = xi.beta + tau * (1.0 - xi.beta);
                out.d_tau = 1.0 - xi.beta;
                out.d_beta = 1.0 - tau;
            }
            break;
        case Variant::kappa:
            if (s == 0) {
                p = tau * (1.0 - xi.alpha);
                out.d_tau = 1.0 - xi.alpha;
                out.d_alpha = -tau;
            } else {
                const double t = tau + (z == 0 ? sens0 : sens1);
                p = xi.beta + t * (1.0 - xi.beta);
                out.d_tau = 1.0 - xi.beta;
                out.d_beta = 1.0 - t;
            }
            break;
        case Variant::delta:
            if (s == 0) {
                p = sens0 + tau * (1.0 - sens0 - xi.alpha);
                out.d_tau = 1.0 - sens0 - xi.alpha;
                out.d_alpha = -tau;
            } else {
                p = xi.beta + tau * (1.0 - sens1 - xi.beta);
                out.d_tau = 1.0 - sens1 - xi.beta;
                out.d_beta = 1.0 - tau;
            }
            break;
        case Variant::zeta:
            if (s == 0) {
                const double k = z == 0 ? 1.0 : 1.0 + sens0;
                p = k * tau * (1.0 - xi.alpha);
                out.d_tau = k * (1.0 - xi.alpha);
                out.d_alpha = -k * tau;
            } else {
                const double k = z == 0 ? 1.0 : 1.0 + sens1;
                p = 1.0 - k * (1.0 - tau) * (1.0 - xi.beta);
                out.d_tau = k * (1.0 - xi.beta);
                out.d_beta = k * (1.0 - tau);
            }
            break;
    }
    bool clamped = false;
    out.p = clamp_prob(p, &clamped);
    if (clamped) out.d_tau = out.d_alpha = out.d_beta = 0.0;
    return out;
}

double model_prob(const PointwiseParams& xi, int s, int z, Variant variant, double sens0,
                  double sens1) {
    return model_prob_grad(xi, s, z, variant, sens0, sens1).p;
}

SieveProblem::SieveProblem(const Dataset& data, const Basis& basis, SensitivityParams sens, double c,
                           double relevance_penalty)
    : basis_(basis), sens_(std::move(sens)), c_(c), lambda_(relevance_penalty) {
    if (!(c >= 0.0 && c < 0.5)) throw InvalidArgument("floor c must lie in [0, 0.5)");
    sens_.validate();
    const std::size_t n = data.size();
    features_ = basis_.expand_rows(data.covariates());
    s_.resize(n);
    z_.resize(n);
    y_.resize(n);
    sens0_.assign(n, sens_.first.constant);
    sens1_.assign(n, sens_.second.constant);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = data[i];
        s_[i] = r.s;
        z_[i] = r.z;
        y_[i] = r.y;
        if (!sens_.first.is_constant()) sens0_[i] = sens_.first.at(r.x);
        if (!sens_.second.is_constant()) sens1_[i] = sens_.second.at(r.x);
    }
}

double SieveProblem::negloglik_and_grad(const Eigen::VectorXd& packed, Eigen::VectorXd* grad) const {
    const Eigen::Index n = features_.rows();
    const Eigen::Index j = features_.cols();
    if (packed.size() != 4 * j)
        throw DimensionError("packed coefficient vector has length " +
                             std::to_string(packed.size()) + ", expected " + std::to_string(4 * j));
    const Eigen::Map<const Eigen::MatrixXd> gamma(packed.data(), j, 4);
    const Eigen::MatrixXd eta = features_ * gamma;  // n x 4

    const double scale = 1.0 - 2.0 * c_;
    const double inv_n = 1.0 / static_cast<double>(n);
    double value = 0.0;
    Eigen::MatrixXd g;
    if (grad) g.setZero(n, 4);

    for (Eigen::Index i = 0; i < n; ++i) {
        double f[4];
        double df[4];
        for (int k = 0; k < 4; ++k) {
            const double e = expit(eta(i, k));
            f[k] = c_ + scale * e;
            df[k] = scale * e * (1.0 - e);
        }
        const PointwiseParams xi{f[0], f[1], f[2], f[3]};
        const int s = s_[i];
        const int z = z_[i];
        const auto mp = model_prob_grad(xi, s, z, sens_.variant, sens0_[i], sens1_[i]);
        const double p = mp.p;
        value -= (y_[i] ? std::log(p) : std::log1p(-p)) * inv_n;

        const double gap = f[1] - f[0];
        const double slack = c_ - std::abs(gap);
        if (slack > 0.0) value += lambda_ * slack * slack * inv_n;

        if (grad) {
            const double w = -(y_[i] ? 1.0 / p : -1.0 / (1.0 - p)) * inv_n;
            g(i, z) += w * mp.d_tau * df[z];
            if (s == 0)
                g(i, 2) += w * mp.d_alpha * df[2];
            else
                g(i, 3) += w * mp.d_beta * df[3];
            if (slack > 0.0) {
                const double dpen = -2.0 * lambda_ * slack * inv_n * (gap >= 0.0 ? 1.0 : -1.0);
                g(i, 1) += dpen * df[1];
                g(i, 0) -= dpen * df[0];
            }
        }
    }
    if (grad) {
        grad->resize(4 * j);
        Eigen::Map<Eigen::MatrixXd> gm(grad->data(), j, 4);
        gm.noalias() = features_.transpose() * g;
    }
    return value;
}

double SieveProblem::loglik(const Eigen::VectorXd& packed) const {
    const Eigen::Index j = features_.cols();
    const Eigen::Map<const Eigen::MatrixXd> gamma(packed.data(), j, 4);
    const Eigen::MatrixXd eta = features_ * gamma;
    const double scale = 1.0 - 2.0 * c_;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < features_.rows(); ++i) {
        const PointwiseParams xi{c_ + scale * expit(eta(i, 0)), c_ + scale * expit(eta(i, 1)),
                                 c_ + scale * expit(eta(i, 2)), c_ + scale * expit(eta(i, 3))};
        const double p = model_prob(xi, s_[i], z_[i], sens_.variant, sens0_[i], sens1_[i]);
        ll += y_[i] ? std::log(p) : std::log1p(-p);
    }
    return ll / static_cast<double>(features_.rows());
}

double SieveProblem::relevance_violation(const Eigen::VectorXd& packed) const {
    const Eigen::Index j = features_.cols();
    const Eigen::Map<const Eigen::MatrixXd> gamma(packed.data(), j, 4);
    const Eigen::MatrixXd eta = features_ * gamma.leftCols(2);
    const double scale = 1.0 - 2.0 * c_;
    std::size_t bad = 0;
    for (Eigen::Index i = 0; i < eta.rows(); ++i)
        if (std::abs(scale * (expit(eta(i, 1)) - expit(eta(i, 0)))) < c_) ++bad;
    return static_cast<double>(bad) / static_cast<double>(eta.rows());
}

void SieveProblem::reparametrize(const Eigen::MatrixXd& t) { features_ = features_ * t; }

namespace {

// Scaled inverse R factor of the feature matrix: features * T has columns
// with unit mean square and zero cross-products.
Eigen::MatrixXd whitening(const Eigen::MatrixXd& features) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(features);
    const Eigen::Index j = features.cols();
    Eigen::MatrixXd r = qr.matrixQR().topRows(j).triangularView<Eigen::Upper>();
    r /= std::sqrt(static_cast<double>(features.rows()));
    for (Eigen::Index k = 0; k < j; ++k)
        if (!(std::abs(r(k, k)) > 1e-10)) return Eigen::MatrixXd::Identity(j, j);
    return r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(j, j));
}

// Maps packed basis coefficients to whitened ones and back.
Eigen::VectorXd apply_blocks(const Eigen::MatrixXd& m, const Eigen::VectorXd& packed) {
    const Eigen::Index j = m.rows();
    Eigen::VectorXd out(packed.size());
    for (int k = 0; k < 4; ++k) out.segment(k * j, j) = m * packed.segment(k * j, j);
    return out;
}

// Intercept-only starting coefficients from stratum-level values.
Eigen::VectorXd intercept_start(const Basis& basis, double c, double t0, double t1, double a,
                                double b) {
    const auto j = static_cast<Eigen::Index>(basis.size());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(4 * j);
    // Locate the constant term; without one, a start at zero is used.
    Eigen::Index const_idx = -1;
    for (Eigen::Index k = 0; k < j; ++k)
        if (basis.terms()[static_cast<std::size_t>(k)].empty()) const_idx = k;
    if (const_idx < 0) return x;
    const double vals[4] = {t0, t1, a, b};
    for (int k = 0; k < 4; ++k) x(k * j + const_idx) = logit_floor(vals[k], c);
    return x;
}

struct StratumMeans {
    double mu[2][2] = {{0.5, 0.5}, {0.5, 0.5}};
};

StratumMeans stratum_means(const Dataset& data) {
    StratumMeans m;
    double sum[2][2] = {};
    double cnt[2][2] = {};
    for (const auto& r : data.records()) {
        sum[r.s][r.z] += r.y;
        cnt[r.s][r.z] += 1.0;
    }
    for (int s = 0; s < 2; ++s)
        for (int z = 0; z < 2; ++z)
            if (cnt[s][z] > 0) m.mu[s][z] = sum[s][z] / cnt[s][z];
    return m;
}

// Plug-in inversion of the pooled stratum means. Falls back to the raw
// means when the inversion is degenerate or inadmissible.
PointwiseParams plugin_start(const StratumMeans& sm) {
    const PointwiseMu m{sm.mu[0][0], sm.mu[0][1], sm.mu[1][0], sm.mu[1][1]};
    PointwiseParams p{0.5 * (m.mu00 + m.mu10), 0.5 * (m.mu01 + m.mu11), 0.1, 0.1};
    try {
        const TauPair t = invert_tau(m);
        const Mechanism mech = recover_mechanism(m, t.t0, t.t1);
        p = {t.t0, t.t1, mech.alpha, mech.beta};
    } catch (const Error&) {
    }
    const auto keep = [](double v) { return std::clamp(std::isfinite(v) ? v : 0.5, 0.02, 0.98); };
    p.tau0 = keep(p.tau0);
    p.tau1 = keep(p.tau1);
    p.alpha = keep(p.alpha);
    p.beta = keep(p.beta);
    return p;
}

}  // namespace

NuisanceEstimates fit(const Dataset& input, const BasisConfig& basis_config,
                      const FitOptions& options, const SensitivityParams& sensitivity,
                      const NuisanceEstimates* warm_start) {
    if (options.restarts < 1) throw InvalidArgument("restarts must be at least 1");
    require_positivity(input);
    const Dataset data = scale_covariates(input);
    const Basis basis(basis_config, data.dim());
    SieveProblem problem(data, basis, sensitivity, options.c, options.relevance_penalty);
    const Eigen::MatrixXd to_basis = whitening(problem.features());
    const Eigen::MatrixXd to_white = to_basis.triangularView<Eigen::Upper>().solve(
        Eigen::MatrixXd::Identity(to_basis.rows(), to_basis.cols()));
    problem.reparametrize(to_basis);

    const StratumMeans sm = stratum_means(data);
    const PointwiseParams plug = plugin_start(sm);

    std::vector<Eigen::VectorXd> starts;
    if (warm_start) {
        const Eigen::VectorXd w = warm_start->packed();
        if (w.size() == static_cast<Eigen::Index>(4 * basis.size()) &&
            warm_start->basis().config() == basis_config)
            starts.push_back(w);
    }
    starts.push_back(intercept_start(basis, options.c, plug.tau0, plug.tau1, plug.alpha, plug.beta));
    for (int r = 1; static_cast<int>(starts.size()) < options.restarts; ++r) {
        std::mt19937_64 rng(derive_seed(options.seed, static_cast<std::uint64_t>(r)));
        std::normal_distribution<double> noise(0.0, 0.5);
        std::uniform_real_distribution<double> mech(0.05, 0.5);
        const double base0 = logit(std::clamp(0.5 * (sm.mu[0][0] + sm.mu[1][0]), 0.02, 0.98));
        const double base1 = logit(std::clamp(0.5 * (sm.mu[0][1] + sm.mu[1][1]), 0.02, 0.98));
        const double t0 = expit(base0 + noise(rng));
        const double t1 = expit(base1 + noise(rng));
        const double a = mech(rng);
        const double b = mech(rng);
        starts.push_back(intercept_start(basis, options.c, t0, t1, a, b));
    }
    if (static_cast<int>(starts.size()) > options.restarts) starts.resize(options.restarts);

    MinimizeOptions mopt;
    mopt.grad_tol = options.grad_tol;
    mopt.max_iter = options.max_iter;
    mopt.f_tol = options.f_tol;
    const Objective objective = [&problem](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        return problem.negloglik_and_grad(x, &g);
    };

    for (auto& x : starts) x = apply_blocks(to_white, x);

    std::vector<MinimizeResult> results(starts.size());
    parallel_for(starts.size(), options.jobs,
                 [&](std::size_t k) { results[k] = minimize_bfgs(objective, starts[k], mopt); });

    const auto accepted = [&](const MinimizeResult& r) {
        return std::isfinite(r.value) && (r.converged || r.flat || r.grad_norm <= options.accept_tol);
    };
    // Restarts that ran out of iterations are resumed from the lowest criterion reached.
    if (std::none_of(results.begin(), results.end(), accepted)) {
        std::size_t lead = 0;
        for (std::size_t k = 1; k < results.size(); ++k)
            if (results[k].value < results[lead].value) lead = k;
        for (int round = 0; round < 3 && !accepted(results[lead]) &&
                            std::isfinite(results[lead].value) && !results[lead].stalled;
             ++round) {
            const int done = results[lead].iterations;
            results[lead] = minimize_bfgs(objective, results[lead].x, mopt);
            results[lead].iterations += done;
        }
    }

    int best = -1;
    int converged = 0;
    double best_grad = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        best_grad = std::min(best_grad, r.grad_norm);
        if (!accepted(r)) continue;
        ++converged;
        if (best < 0 || r.value < results[static_cast<std::size_t>(best)].value)
            best = static_cast<int>(k);
    }
    if (best < 0)
        throw ConvergenceError("sieve fit: none of " + std::to_string(results.size()) +
                               " restarts converged (smallest gradient norm " +
                               std::to_string(best_grad) + ")");

    const auto& r = results[static_cast<std::size_t>(best)];
    NuisanceEstimates est =
        NuisanceEstimates::from_packed(basis, apply_blocks(to_basis, r.x), options.c, sensitivity);
    auto& d = est.diagnostics;
    d.criterion = r.value;
    d.loglik = problem.loglik(r.x);
    d.grad_norm = r.grad_norm;
    d.iterations = r.iterations;
    d.restarts_used = static_cast<int>(results.size());
    d.restarts_converged = converged;
    d.best_restart = best;
    d.relevance_violation = problem.relevance_violation(r.x);
    if (d.relevance_violation > 0.10)
        d.warnings.push_back("relevance constraint |tau1 - tau0| >= c fails on " +
                             std::to_string(d.relevance_violation * 100.0) +
                             "% of the sample; the auxiliary variable may be irrelevant");
    return est;
}

double predict_tau(const NuisanceEstimates& est, int z, const std::vector<double>& x) {
    return z == 0 ? est.tau0.eval(x) : est.tau1.eval(x);
}

double predict_tau_sz(const NuisanceEstimates& est, int s, int z, const std::vector<double>& x,
                      bool* clipped) {
    double t = predict_tau(est, z, x);
    if (est.variant() == Variant::kappa && s == 1)
        t += z == 0 ? est.sensitivity.first.at(x) : est.sensitivity.second.at(x);
    const double out = std::clamp(t, 0.0, 1.0);
    if (clipped) *clipped = out != t;
    return out;
}

std::vector<double> tau_scores(const NuisanceEstimates& est, const Dataset& input) {
    const Dataset data = scale_covariates(input);
    const Eigen::MatrixXd phi = est.basis().expand_rows(data.covariates());
    const Eigen::VectorXd t0 = est.tau0.eval_rows(phi);
    const Eigen::VectorXd t1 = est.tau1.eval_rows(phi);
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        out[i] = data[i].z == 0 ? t0(static_cast<Eigen::Index>(i)) : t1(static_cast<Eigen::Index>(i));
    return out;
}

double threshold_preserving_rate(const std::vector<double>& scores, double target_rate) {
    if (scores.empty()) throw EmptyDataError("no scores to threshold");
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    if (!(target_rate > 0.0)) return 1.0;
    const double n = static_cast<double>(sorted.size());
    auto k = static_cast<std::size_t>(std::ceil(target_rate * n - 1e-9));
    k = std::clamp<std::size_t>(k, 1, sorted.size());
    return sorted[k - 1];
}

double threshold_preserving_rate(const NuisanceEstimates& est, const Dataset& data,
                                 double target_rate) {
    return threshold_preserving_rate(tau_scores(est, data), target_rate);
}

}  // namespace desert
