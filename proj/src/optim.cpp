#include "desert/optim.hpp"

#include <cmath>
#include <vector>

namespace desert {

MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizeOptions& opt) {
    const Eigen::Index k = x0.size();
    MinimizeResult res;
    res.x = std::move(x0);
    Eigen::VectorXd g(k);
    res.value = f(res.x, g);
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res.value)) return res;

    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(k, k);
    bool scaled = false;
    Eigen::VectorXd g_new(k), x_new(k);
    std::vector<double> history{res.value};

    for (int it = 0; it < opt.max_iter; ++it) {
        if (res.grad_norm <= opt.grad_tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd p = -h * g;
        double slope = g.dot(p);
        if (!(slope < 0.0)) {
            h.setIdentity();
            scaled = false;
            p = -g;
            slope = -g.squaredNorm();
        }
        const double pmax = p.lpNorm<Eigen::Infinity>();
        if (pmax > opt.max_step) {
            p *= opt.max_step / pmax;
            slope *= opt.max_step / pmax;
        }

        double step = 1.0;
        double f_new = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = res.x + step * p;
            f_new = f(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!h.isIdentity()) {
                // Retry from steepest descent before giving up.
                h.setIdentity();
                scaled = false;
                continue;
            }
            res.stalled = true;
            break;
        }

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                h *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = h * y;
            h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) -
                 rho * (hy * s.transpose() + s * hy.transpose());
        }
        const double previous = res.value;
        res.x = x_new;
        g = g_new;
        res.value = f_new;
        res.grad_norm = g.lpNorm<Eigen::Infinity>();
        res.iterations = it + 1;
        if (previous - f_new <= 1e-15 * std::max(1.0, std::abs(f_new)) &&
            res.grad_norm > opt.grad_tol && h.isIdentity()) {
            res.stalled = true;
            break;
        }
        history.push_back(f_new);
        if (opt.f_tol > 0.0 && static_cast<int>(history.size()) > opt.f_window) {
            const double past = history[history.size() - 1 - static_cast<std::size_t>(opt.f_window)];
            if (past - f_new <= opt.f_tol * std::max(1.0, std::abs(f_new))) {
                res.flat = true;
                break;
            }
        }
    }
    if (res.grad_norm <= opt.grad_tol) res.converged = true;
    return res;
}

}  // namespace desert
