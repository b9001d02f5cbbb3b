#include "desert/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "desert/error.hpp"
#include "desert/regress.hpp"

namespace desert {

namespace {

constexpr double kRidge = 1e-6;

double mean_score_gap(const Eigen::VectorXd& scores, const Dataset& data) {
    double sum[2] = {0.0, 0.0};
    double cnt[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < data.size(); ++i) {
        sum[data[i].s] += scores(static_cast<Eigen::Index>(i));
        cnt[data[i].s] += 1.0;
    }
    if (cnt[0] == 0.0 || cnt[1] == 0.0) throw PositivityError("both groups must be present");
    return sum[1] / cnt[1] - sum[0] / cnt[0];
}

Eigen::VectorXd expit_rows(const Eigen::MatrixXd& phi, const Eigen::VectorXd& gamma) {
    Eigen::VectorXd eta = phi * gamma;
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = expit(eta(i));
    return eta;
}

}  // namespace

BasisConfig baseline_basis(std::size_t covariate_dim, bool uses_s, int degree,
                           int interaction_order) {
    BasisConfig cfg;
    cfg.degree = degree;
    cfg.interaction_order = interaction_order;
    const std::size_t binary = uses_s ? 2 : 1;
    cfg.max_power.assign(binary, 1);
    cfg.max_power.resize(binary + covariate_dim, degree);
    return cfg;
}

Eigen::MatrixXd baseline_design(const Basis& basis, const Dataset& data, bool uses_s,
                                int s_override) {
    const std::size_t off = uses_s ? 2 : 1;
    Eigen::MatrixXd raw(data.size(), off + data.dim());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data[i];
        const auto row = static_cast<Eigen::Index>(i);
        if (uses_s) raw(row, 0) = s_override >= 0 ? s_override : r.s;
        raw(row, static_cast<Eigen::Index>(off - 1)) = r.z;
        for (std::size_t j = 0; j < data.dim(); ++j)
            raw(row, static_cast<Eigen::Index>(off + j)) = r.x[j];
    }
    return basis.expand_rows(raw);
}

double ScoreModel::eval(int s, int z, const std::vector<double>& x) const {
    std::vector<double> v;
    v.reserve(x.size() + 2);
    if (uses_s) v.push_back(s);
    v.push_back(z);
    v.insert(v.end(), x.begin(), x.end());
    return expit(basis.expand(v).dot(gamma));
}

Eigen::VectorXd ScoreModel::eval_rows(const Dataset& data) const {
    return expit_rows(baseline_design(basis, data, uses_s), gamma);
}

namespace {

ScoreModel fit_plain(const Dataset& input, int degree, int order, bool uses_s) {
    const Dataset data = scale_covariates(input);
    ScoreModel m;
    m.uses_s = uses_s;
    m.basis = Basis(baseline_basis(data.dim(), uses_s, degree, order), data.dim() + (uses_s ? 2 : 1));
    const Eigen::MatrixXd phi = baseline_design(m.basis, data, uses_s);
    LogitOptions opt;
    opt.ridge = kRidge;
    const LogitFit f = fit_logit(phi, data.outcomes(), opt);
    m.gamma = f.gamma;
    m.iterations = f.iterations;
    return m;
}

}  // namespace

ScoreModel fit_uml(const Dataset& data, int degree, int order) {
    return fit_plain(data, degree, order, true);
}

ScoreModel fit_ftu(const Dataset& data, int degree, int order) {
    return fit_plain(data, degree, order, false);
}

ScoreModel fit_mlc(const Dataset& input, int degree, int order, double tol) {
    const Dataset data = scale_covariates(input);
    ScoreModel m = fit_plain(data, degree, order, true);
    const Eigen::MatrixXd phi = baseline_design(m.basis, data, true);
    const Eigen::MatrixXd phi1 = baseline_design(m.basis, data, true, 1);
    const Eigen::MatrixXd phi0 = baseline_design(m.basis, data, true, 0);
    const Eigen::VectorXd y = data.outcomes();
    const double inv_n = 1.0 / static_cast<double>(data.size());
    const Eigen::Index j = phi.cols();

    // Constraint value, gradient and Hessian.
    const auto constraint = [&](const Eigen::VectorXd& g, Eigen::VectorXd* grad,
                                Eigen::MatrixXd* hess) {
        const Eigen::VectorXd e1 = expit_rows(phi1, g);
        const Eigen::VectorXd e0 = expit_rows(phi0, g);
        if (grad) {
            const Eigen::VectorXd w1 = e1.array() * (1.0 - e1.array());
            const Eigen::VectorXd w0 = e0.array() * (1.0 - e0.array());
            *grad = (phi1.transpose() * w1 - phi0.transpose() * w0) * inv_n;
            if (hess) {
                const Eigen::VectorXd h1 = w1.array() * (1.0 - 2.0 * e1.array());
                const Eigen::VectorXd h0 = w0.array() * (1.0 - 2.0 * e0.array());
                *hess = (phi1.transpose() * h1.asDiagonal() * phi1 -
                         phi0.transpose() * h0.asDiagonal() * phi0) *
                        inv_n;
            }
        }
        return (e1 - e0).sum() * inv_n;
    };
    // Augmented Lagrangian objective to minimize, with gradient and Hessian.
    const auto objective = [&](const Eigen::VectorXd& g, double lambda, double rho,
                               Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
        Eigen::VectorXd gl, gc;
        Eigen::MatrixXd hc;
        const double ll = logit_loglik(g, phi, y, Eigen::VectorXd(), kRidge, grad ? &gl : nullptr);
        const double cv = constraint(g, grad ? &gc : nullptr, hess ? &hc : nullptr);
        if (grad) *grad = -gl + (lambda + rho * cv) * gc;
        if (hess) {
            const Eigen::VectorXd p = expit_rows(phi, g);
            const Eigen::VectorXd w = p.array() * (1.0 - p.array());
            *hess = phi.transpose() * w.asDiagonal() * phi * inv_n;
            hess->diagonal().array() += kRidge;
            *hess += (lambda + rho * cv) * hc + rho * gc * gc.transpose();
        }
        return -ll + lambda * cv + 0.5 * rho * cv * cv;
    };

    double lambda = 0.0;
    double rho = 10.0;
    Eigen::VectorXd gamma = m.gamma;
    double c = constraint(gamma, nullptr, nullptr);
    for (int outer = 0; outer < 40 && std::abs(c) > tol; ++outer) {
        // Damped Newton; the Hessian is shifted until positive definite.
        for (int it = 0; it < 100; ++it) {
            Eigen::VectorXd grad;
            Eigen::MatrixXd hess;
            const double f = objective(gamma, lambda, rho, &grad, &hess);
            if (grad.lpNorm<Eigen::Infinity>() < 1e-9) break;
            Eigen::VectorXd dir;
            double shift = 0.0;
            for (int k = 0; k < 20; ++k) {
                Eigen::MatrixXd h = hess;
                h.diagonal().array() += shift;
                const Eigen::LLT<Eigen::MatrixXd> llt(h);
                if (llt.info() == Eigen::Success) {
                    dir = -llt.solve(grad);
                    break;
                }
                shift = shift == 0.0 ? 1e-6 : shift * 10.0;
            }
            if (dir.size() != j) dir = -grad;
            if (-grad.dot(dir) < 1e-16) break;
            double step = 1.0;
            bool moved = false;
            for (int k = 0; k < 50; ++k) {
                const Eigen::VectorXd trial = gamma + step * dir;
                const double ft = objective(trial, lambda, rho, nullptr, nullptr);
                if (std::isfinite(ft) && ft <= f + 1e-4 * step * grad.dot(dir)) {
                    gamma = trial;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            ++m.iterations;
            if (!moved) break;
        }
        const double c_new = constraint(gamma, nullptr, nullptr);
        lambda += rho * c_new;
        if (std::abs(c_new) > 0.25 * std::abs(c)) rho = std::min(rho * 10.0, 1e8);
        c = c_new;
    }
    m.gamma = gamma;
    m.constraint = c;
    if (std::abs(c) > tol)
        m.warnings.push_back("MLC constraint not met: |E[d(1)-d(0)]| = " + std::to_string(std::abs(c)));
    return m;
}

ScoreModel fit_ld(const Dataset& input, int degree, int order, double tol, int max_iter) {
    const Dataset data = scale_covariates(input);
    ScoreModel m;
    m.uses_s = false;
    m.basis = Basis(baseline_basis(data.dim(), false, degree, order), data.dim() + 1);
    const Eigen::MatrixXd phi = baseline_design(m.basis, data, false);
    const Eigen::VectorXd y = data.outcomes();
    const std::size_t n = data.size();

    double p1 = 0.0;
    for (const auto& r : data.records()) p1 += r.s;
    p1 /= static_cast<double>(n);
    const double p0 = 1.0 - p1;
    if (p0 <= 0.0 || p1 <= 0.0) throw PositivityError("both groups must be present");

    LogitOptions opt;
    opt.ridge = kRidge;
    Eigen::VectorXd start;
    // Score gap across S after refitting with multiplier lambda.
    const auto evaluate = [&](double lambda, Eigen::VectorXd& gamma) {
        Eigen::VectorXd w(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const int s = data[i].s;
            const double c = (1 - s) / p0 - s / p1;
            const double wt = std::exp(std::clamp(lambda * c, -30.0, 30.0));
            w(static_cast<Eigen::Index>(i)) = data[i].y ? wt / (1.0 + wt) : 1.0 / (1.0 + wt);
        }
        w *= static_cast<double>(n) / w.sum();
        const LogitFit f = fit_logit(phi, y, opt, w, start.size() ? &start : nullptr);
        gamma = f.gamma;
        start = f.gamma;
        ++m.iterations;
        return mean_score_gap(expit_rows(phi, gamma), data);
    };

    Eigen::VectorXd g_a, g_b;
    double la = 0.0;
    double fa = evaluate(la, g_a);
    m.gamma = g_a;
    m.constraint = fa;
    if (std::abs(fa) < tol) return m;

    // Bracket the root; the gap decreases in lambda.
    double step = fa > 0.0 ? 0.5 : -0.5;
    double lb = la + step;
    double fb = evaluate(lb, g_b);
    while (fa * fb > 0.0 && m.iterations < max_iter) {
        la = lb;
        fa = fb;
        g_a = g_b;
        step *= 2.0;
        lb = la + step;
        fb = evaluate(lb, g_b);
    }
    // Illinois regula falsi.
    double best_f = std::abs(fa) < std::abs(fb) ? fa : fb;
    Eigen::VectorXd best_g = std::abs(fa) < std::abs(fb) ? g_a : g_b;
    while (std::abs(best_f) >= tol && m.iterations < max_iter && fa * fb < 0.0) {
        const double lc = (la * fb - lb * fa) / (fb - fa);
        Eigen::VectorXd g_c;
        const double fc = evaluate(lc, g_c);
        if (std::abs(fc) < std::abs(best_f)) {
            best_f = fc;
            best_g = g_c;
        }
        if (fc * fb < 0.0) {
            la = lb;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        lb = lc;
        fb = fc;
    }
    m.gamma = best_g;
    m.constraint = best_f;
    if (std::abs(best_f) >= tol)
        m.warnings.push_back("label debiasing stopped with score gap " + std::to_string(best_f));
    return m;
}

}  // namespace desert
