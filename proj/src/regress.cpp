#include "desert/regress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "desert/error.hpp"

namespace desert {

namespace {

inline double log1pexp(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

}  // namespace

double logit_loglik(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& features,
                    const Eigen::VectorXd& labels, const Eigen::VectorXd& weights, double ridge,
                    Eigen::VectorXd* grad) {
    const Eigen::Index n = features.rows();
    const bool weighted = weights.size() > 0;
    const double total = weighted ? weights.sum() : static_cast<double>(n);
    const Eigen::VectorXd eta = features * gamma;
    double ll = 0.0;
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = weighted ? weights(i) : 1.0;
        ll += w * (labels(i) * eta(i) - log1pexp(eta(i)));
        resid(i) = w * (labels(i) - expit(eta(i)));
    }
    ll = ll / total - 0.5 * ridge * gamma.squaredNorm();
    if (grad) *grad = features.transpose() * resid / total - ridge * gamma;
    return ll;
}

LogitFit fit_logit(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                   const LogitOptions& opt, const Eigen::VectorXd& weights,
                   const Eigen::VectorXd* start) {
    const Eigen::Index n = features.rows();
    const Eigen::Index k = features.cols();
    if (n == 0) throw EmptyDataError("cannot fit a logit model to zero observations");
    if (labels.size() != n) throw DimensionError("labels and features differ in length");
    const bool weighted = weights.size() > 0;
    if (weighted && weights.size() != n) throw DimensionError("weights and features differ in length");

    if (opt.ridge <= 0.0) {
        double pos = 0.0, neg = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double w = weighted ? weights(i) : 1.0;
            (labels(i) > 0.5 ? pos : neg) += w;
        }
        if (pos == 0.0 || neg == 0.0)
            throw ConvergenceError(
                "all labels are equal: the logit likelihood has no maximizer; use a ridge > 0");
    }

    const double total = weighted ? weights.sum() : static_cast<double>(n);
    LogitFit fit;
    fit.gamma = start ? *start : Eigen::VectorXd::Zero(k);
    Eigen::VectorXd grad(k), trial_grad(k);
    double ll = logit_loglik(fit.gamma, features, labels, weights, opt.ridge, &grad);

    for (int it = 0; it < opt.max_iter; ++it) {
        fit.grad_norm = grad.lpNorm<Eigen::Infinity>();
        if (fit.grad_norm <= opt.tol) break;

        const Eigen::VectorXd eta = features * fit.gamma;
        Eigen::VectorXd wdiag(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = expit(eta(i));
            wdiag(i) = (weighted ? weights(i) : 1.0) * p * (1.0 - p) / total;
        }
        Eigen::MatrixXd info = features.transpose() * wdiag.asDiagonal() * features;
        info.diagonal().array() += opt.ridge;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        Eigen::VectorXd dir;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) dir = ldlt.solve(grad);
        if (dir.size() != k || !dir.allFinite() || dir.dot(grad) <= 0.0) dir = grad;

        double step = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 50; ++ls) {
            const Eigen::VectorXd trial = fit.gamma + step * dir;
            const double trial_ll = logit_loglik(trial, features, labels, weights, opt.ridge, &trial_grad);
            if (std::isfinite(trial_ll) && trial_ll >= ll) {
                fit.gamma = trial;
                ll = trial_ll;
                grad = trial_grad;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        fit.iterations = it + 1;
        fit.trace.push_back(ll);
        if (!moved) break;
    }
    fit.loglik = ll;
    fit.grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (fit.grad_norm > std::max(opt.tol, 1e-6))
        throw ConvergenceError("series logit did not converge (score sup-norm " +
                               std::to_string(fit.grad_norm) +
                               "); the classes may be separable, consider a larger ridge");
    return fit;
}

SeriesFunction fit_series_logit(const Basis& basis, const Eigen::MatrixXd& features,
                                const Eigen::VectorXd& labels, double ridge) {
    LogitOptions opt;
    opt.ridge = ridge;
    SeriesFunction f;
    f.basis = basis;
    f.gamma = fit_logit(features, labels, opt).gamma;
    return f;
}

MuModel fit_mu_model(const Dataset& data, const BasisConfig& config, double ridge) {
    require_positivity(data);
    const Basis basis(config, data.dim());
    const Eigen::MatrixXd phi = basis.expand_rows(data.covariates());
    MuModel model;
    for (int s = 0; s < 2; ++s) {
        for (int z = 0; z < 2; ++z) {
            std::vector<Eigen::Index> rows;
            for (std::size_t i = 0; i < data.size(); ++i)
                if (data[i].s == s && data[i].z == z) rows.push_back(static_cast<Eigen::Index>(i));
            Eigen::MatrixXd f(rows.size(), phi.cols());
            Eigen::VectorXd y(rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                f.row(r) = phi.row(rows[r]);
                y(r) = data[rows[r]].y;
            }
            model.mu[s][z] = fit_series_logit(basis, f, y, ridge);
        }
    }
    return model;
}

double predict_mu(const MuModel& model, int s, int z, const std::vector<double>& x) {
    return model.mu.at(s).at(z).eval(x);
}

std::array<double, 4> floor_probabilities(std::array<double, 4> p, double eps) {
    std::array<bool, 4> fixed{};
    for (int round = 0; round < 4; ++round) {
        bool changed = false;
        for (int k = 0; k < 4; ++k)
            if (!fixed[k] && p[k] < eps) {
                fixed[k] = true;
                changed = true;
            }
        const int nfixed = static_cast<int>(std::count(fixed.begin(), fixed.end(), true));
        double free_mass = 0.0;
        for (int k = 0; k < 4; ++k)
            if (!fixed[k]) free_mass += p[k];
        const double target = 1.0 - nfixed * eps;
        for (int k = 0; k < 4; ++k) p[k] = fixed[k] ? eps : p[k] * target / free_mass;
        if (!changed) break;
    }
    return p;
}

std::array<double, 4> PropensityModel::raw(const Eigen::VectorXd& phi) const {
    const Eigen::Vector3d eta = coef.transpose() * phi;
    const double m = std::max(0.0, eta.maxCoeff());
    std::array<double, 4> p{std::exp(-m), std::exp(eta(0) - m), std::exp(eta(1) - m),
                            std::exp(eta(2) - m)};
    const double total = p[0] + p[1] + p[2] + p[3];
    for (auto& v : p) v /= total;
    return p;
}

std::array<double, 4> PropensityModel::probs(const Eigen::VectorXd& phi) const {
    return floor_probabilities(raw(phi), floor);
}

double multinomial_loglik(const Eigen::VectorXd& packed, const Eigen::MatrixXd& features,
                          const std::vector<int>& classes, double ridge, Eigen::VectorXd* grad) {
    const Eigen::Index n = features.rows();
    const Eigen::Index j = features.cols();
    const Eigen::Map<const Eigen::MatrixXd> coef(packed.data(), j, 3);
    const Eigen::MatrixXd eta = features * coef;  // n x 3
    Eigen::MatrixXd resid(n, 3);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = std::max(0.0, eta.row(i).maxCoeff());
        double denom = std::exp(-m);
        for (int k = 0; k < 3; ++k) denom += std::exp(eta(i, k) - m);
        const double lse = m + std::log(denom);
        const int c = classes[i];
        ll += (c == 0 ? 0.0 : eta(i, c - 1)) - lse;
        for (int k = 0; k < 3; ++k) resid(i, k) = (c == k + 1 ? 1.0 : 0.0) - std::exp(eta(i, k) - lse);
    }
    ll = ll / n - 0.5 * ridge * packed.squaredNorm();
    if (grad) {
        grad->resize(packed.size());
        Eigen::Map<Eigen::MatrixXd> g(grad->data(), j, 3);
        g = features.transpose() * resid / static_cast<double>(n);
        *grad -= ridge * packed;
    }
    return ll;
}

PropensityModel fit_multinomial(const Basis& basis, const Eigen::MatrixXd& features,
                                const std::vector<int>& classes, const LogitOptions& opt,
                                double floor) {
    const Eigen::Index n = features.rows();
    const Eigen::Index j = features.cols();
    if (static_cast<Eigen::Index>(classes.size()) != n)
        throw DimensionError("class labels and features differ in length");
    std::array<std::size_t, 4> counts{};
    for (int c : classes) {
        if (c < 0 || c > 3) throw InvalidArgument("class label outside {0,1,2,3}");
        ++counts[c];
    }
    for (int c = 0; c < 4; ++c)
        if (counts[c] == 0)
            throw PositivityError("propensity class (s=" + std::to_string(c / 2) +
                                  ", z=" + std::to_string(c % 2) + ") is empty");

    Eigen::VectorXd packed = Eigen::VectorXd::Zero(3 * j);
    Eigen::VectorXd grad(3 * j), trial_grad(3 * j);
    double ll = multinomial_loglik(packed, features, classes, opt.ridge, &grad);
    for (int it = 0; it < opt.max_iter; ++it) {
        if (grad.lpNorm<Eigen::Infinity>() <= opt.tol) break;
        const Eigen::Map<const Eigen::MatrixXd> coef(packed.data(), j, 3);
        const Eigen::MatrixXd eta = features * coef;
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(3 * j, 3 * j);
        Eigen::MatrixXd probs(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = std::max(0.0, eta.row(i).maxCoeff());
            double denom = std::exp(-m);
            for (int k = 0; k < 3; ++k) denom += std::exp(eta(i, k) - m);
            for (int k = 0; k < 3; ++k) probs(i, k) = std::exp(eta(i, k) - m) / denom;
        }
        for (int a = 0; a < 3; ++a) {
            for (int b = a; b < 3; ++b) {
                Eigen::VectorXd w(n);
                for (Eigen::Index i = 0; i < n; ++i)
                    w(i) = probs(i, a) * ((a == b ? 1.0 : 0.0) - probs(i, b)) / n;
                const Eigen::MatrixXd block = features.transpose() * w.asDiagonal() * features;
                info.block(a * j, b * j, j, j) = block;
                if (a != b) info.block(b * j, a * j, j, j) = block.transpose();
            }
        }
        info.diagonal().array() += opt.ridge;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        Eigen::VectorXd dir;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) dir = ldlt.solve(grad);
        if (dir.size() != grad.size() || !dir.allFinite() || dir.dot(grad) <= 0.0) dir = grad;
        double step = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 50; ++ls) {
            const Eigen::VectorXd trial = packed + step * dir;
            const double t = multinomial_loglik(trial, features, classes, opt.ridge, &trial_grad);
            if (std::isfinite(t) && t >= ll) {
                packed = trial;
                ll = t;
                grad = trial_grad;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    if (grad.lpNorm<Eigen::Infinity>() > std::max(opt.tol, 1e-6))
        throw ConvergenceError("multinomial logit did not converge");

    PropensityModel model;
    model.basis = basis;
    model.coef = Eigen::Map<const Eigen::MatrixXd>(packed.data(), j, 3);
    model.floor = floor;
    return model;
}

PropensityModel fit_propensity(const Dataset& data, const BasisConfig& config,
                               const LogitOptions& opt, double floor) {
    require_positivity(data);
    const Basis basis(config, data.dim());
    const Eigen::MatrixXd phi = basis.expand_rows(data.covariates());
    std::vector<int> classes(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) classes[i] = stratum_class(data[i].s, data[i].z);
    return fit_multinomial(basis, phi, classes, opt, floor);
}

double predict_pi(const PropensityModel& model, int s, int z, const std::vector<double>& x) {
    return model.probs(model.basis.expand(x)).at(stratum_class(s, z));
}

}  // namespace desert
