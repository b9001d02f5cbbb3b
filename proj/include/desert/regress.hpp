#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "desert/basis.hpp"
#include "desert/data.hpp"

namespace desert {

struct LogitOptions {
    double ridge = 1e-8;
    double tol = 1e-8;  // sup-norm of the penalized score
    int max_iter = 200;
};

struct LogitFit {
    Eigen::VectorXd gamma;
    double loglik = 0.0;  // penalized mean log-likelihood at gamma
    double grad_norm = 0.0;
    int iterations = 0;
    std::vector<double> trace;  // penalized log-likelihood after each iteration
};

// Weighted mean Bernoulli log-likelihood minus (ridge/2)|gamma|^2 and its
// gradient. Empty `weights` means unit weights.
double logit_loglik(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& features,
                    const Eigen::VectorXd& labels, const Eigen::VectorXd& weights, double ridge,
                    Eigen::VectorXd* grad = nullptr);

// Damped Newton ascent on logit_loglik; gradient ascent when the Newton
// system is not positive definite. Throws ConvergenceError on separation
// without a ridge.
LogitFit fit_logit(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                   const LogitOptions& opt = {}, const Eigen::VectorXd& weights = {},
                   const Eigen::VectorXd* start = nullptr);

SeriesFunction fit_series_logit(const Basis& basis, const Eigen::MatrixXd& features,
                                const Eigen::VectorXd& labels, double ridge = 1e-8);

// mu_sz(x) = f(Y=1 | S=s, Z=z, X=x), one series logit per stratum.
struct MuModel {
    std::array<std::array<SeriesFunction, 2>, 2> mu;  // [s][z]
};

MuModel fit_mu_model(const Dataset& data, const BasisConfig& config, double ridge = 1e-8);
double predict_mu(const MuModel& model, int s, int z, const std::vector<double>& x);

inline int stratum_class(int s, int z) { return 2 * s + z; }

// Multinomial logit for pi_sz(x) = f(S=s, Z=z | X=x); class index 2s+z,
// reference class (0,0).
struct PropensityModel {
    Basis basis;
    Eigen::MatrixXd coef;  // J x 3, columns for classes 01, 10, 11
    double floor = 0.01;

    std::array<double, 4> raw(const Eigen::VectorXd& phi) const;
    // Floored at `floor` and renormalized to sum to one.
    std::array<double, 4> probs(const Eigen::VectorXd& phi) const;
};

// Sets entries below eps to eps and rescales the rest so the vector sums to
// one, repeating until every entry is >= eps.
std::array<double, 4> floor_probabilities(std::array<double, 4> p, double eps);

double multinomial_loglik(const Eigen::VectorXd& packed, const Eigen::MatrixXd& features,
                          const std::vector<int>& classes, double ridge,
                          Eigen::VectorXd* grad = nullptr);

PropensityModel fit_multinomial(const Basis& basis, const Eigen::MatrixXd& features,
                                const std::vector<int>& classes, const LogitOptions& opt = {},
                                double floor = 0.01);

PropensityModel fit_propensity(const Dataset& data, const BasisConfig& config,
                               const LogitOptions& opt = {}, double floor = 0.01);

double predict_pi(const PropensityModel& model, int s, int z, const std::vector<double>& x);

}  // namespace desert
