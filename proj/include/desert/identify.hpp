#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "desert/data.hpp"
#include "desert/regress.hpp"

namespace desert {

// Desert decision rule and unfairness mechanism at a fixed x.
struct PointwiseParams {
    double tau0 = 0.5;
    double tau1 = 0.5;
    double alpha = 0.0;
    double beta = 0.0;
};

// Observed-decision probabilities mu_sz at a fixed x.
struct PointwiseMu {
    double mu00 = 0.5;
    double mu01 = 0.5;
    double mu10 = 0.5;
    double mu11 = 0.5;

    double at(int s, int z) const { return s == 0 ? (z == 0 ? mu00 : mu01) : (z == 0 ? mu10 : mu11); }
};

struct TauPair {
    double t0 = 0.0;
    double t1 = 0.0;
    double at(int z) const { return z == 0 ? t0 : t1; }
};

// |denominator| below this is treated as a failure of the relevance condition.
inline constexpr double kWeakAuxiliaryTol = 1e-10;

// Checks c <= tau, alpha, beta <= 1-c and |tau1 - tau0| >= c.
bool is_valid(const PointwiseParams& p, double c);

// mu_0z = tau_z (1 - alpha), mu_1z = beta + tau_z (1 - beta).
PointwiseMu forward_mu(const PointwiseParams& p);

// Closed-form T_z = mu_0z (mu11 - mu10) / [mu01 (1 - mu10) - mu00 (1 - mu11)].
// Values are returned unclipped even when they leave [0,1].
TauPair invert_tau(const PointwiseMu& m);

struct Mechanism {
    double alpha = 0.0;
    double beta = 0.0;
    double alpha_gap = 0.0;  // |alpha(z=0) - alpha(z=1)|
    double beta_gap = 0.0;
    std::vector<std::string> warnings;  // e.g. negative alpha
};

// alpha = 1 - mu_0z / T_z and beta = (mu_1z - T_z) / (1 - T_z), averaged
// over z = 0, 1.
Mechanism recover_mechanism(const PointwiseMu& m, double t0, double t1);

// d(tau0, tau1, alpha, beta) / d(mu00, mu01, mu10, mu11), by the chain rule
// through invert_tau and recover_mechanism. Row order tau0, tau1, alpha,
// beta; column order mu00, mu01, mu10, mu11.
Eigen::Matrix4d identification_jacobian(const PointwiseMu& m);

// Observable implications of the identifying assumptions, evaluated on fitted mu.
struct ImplicationReport {
    std::size_t n = 0;
    double tol = 0.0;
    double threshold = 0.0;
    // Fractions of evaluation points violating: (i) mu_1z >= mu_0z,
    // (ii) mu_s1 != mu_s0, (iii) sign(mu11 - mu10) == sign(mu01 - mu00).
    std::array<double, 3> violation_fraction{};
    std::array<bool, 3> flagged{};
    bool any_flagged() const { return flagged[0] || flagged[1] || flagged[2]; }
    std::string to_text() const;
};

ImplicationReport check_testable_implications(const std::vector<PointwiseMu>& points,
                                              double tol = 0.01, double threshold = 0.05);
ImplicationReport check_testable_implications(const MuModel& mu_hat, const Dataset& data,
                                              double tol = 0.01, double threshold = 0.05);

// Legitimate differential treatment: tau_1z = tau_0z + kappa_z.
struct TauKappa {
    std::array<std::array<double, 2>, 2> tau{};  // [s][z]
};
PointwiseMu forward_mu_kappa(const PointwiseParams& p, double kappa0, double kappa1);
TauKappa invert_tau_kappa(const PointwiseMu& m, double kappa0, double kappa1);

// Two-sided errors: f(Y=1|Y*=0,S=0) = delta0, f(Y=0|Y*=1,S=1) = delta1.
PointwiseMu forward_mu_delta(const PointwiseParams& p, double delta0, double delta1);
TauPair invert_tau_delta(const PointwiseMu& m, double delta0, double delta1);

// Z-differential mechanism; p.alpha and p.beta are the z = 0 values and
// 1 - alpha_1 = (1 + zeta0)(1 - alpha_0), 1 - beta_1 = (1 + zeta1)(1 - beta_0).
PointwiseMu forward_mu_zeta(const PointwiseParams& p, double zeta0, double zeta1);
TauPair invert_tau_zeta(const PointwiseMu& m, double zeta0, double zeta1);

// First-order bias of T_z when the one-sided assumption fails by (delta0, delta1).
double bias_linearization(double tau_z, double alpha, double beta, double delta0, double delta1);

}  // namespace desert
