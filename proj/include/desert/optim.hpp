#pragma once

#include <functional>

#include <Eigen/Dense>

namespace desert {

// Objective returning f(x) and writing its gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct MinimizeOptions {
    double grad_tol = 1e-8;  // sup-norm of the gradient
    int max_iter = 500;
    double max_step = 10.0;  // cap on the sup-norm of a single step
    // Stop once f has decreased by less than f_tol * max(1, |f|) over the
    // last f_window iterations. Zero disables the test.
    double f_tol = 0.0;
    int f_window = 25;
};

struct MinimizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double grad_norm = 0.0;  // sup-norm at x
    int iterations = 0;
    bool converged = false;  // gradient tolerance reached
    bool stalled = false;    // line search could not decrease f further
    bool flat = false;       // stopped by the f_tol test
};

// BFGS with Armijo backtracking. The accepted iterates have non-increasing
// objective values.
MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizeOptions& opt = {});

}  // namespace desert
