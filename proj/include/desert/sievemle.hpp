#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "desert/basis.hpp"
#include "desert/data.hpp"
#include "desert/identify.hpp"

namespace desert {

enum class Variant { baseline, kappa, delta, zeta };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

// One sensitivity parameter, either a constant or a table over covariate
// points (scaled coordinates) read by nearest-neighbour lookup.
struct SensitivityFunction {
    double constant = 0.0;
    std::vector<std::vector<double>> grid;
    std::vector<double> values;

    bool is_constant() const noexcept { return grid.empty(); }
    double at(const std::vector<double>& x) const;
    double min_value() const;
    double max_value() const;

    SensitivityFunction() = default;
    SensitivityFunction(double c) : constant(c) {}
};

// (kappa0, kappa1), (delta0, delta1) or (zeta0, zeta1) depending on variant.
struct SensitivityParams {
    Variant variant = Variant::baseline;
    SensitivityFunction first;
    SensitivityFunction second;

    static SensitivityParams baseline() { return {}; }
    static SensitivityParams kappa(double k0, double k1) { return {Variant::kappa, k0, k1}; }
    static SensitivityParams delta(double d0, double d1) { return {Variant::delta, d0, d1}; }
    static SensitivityParams zeta(double z0, double z1) { return {Variant::zeta, z0, z1}; }

    // delta in [0,1), zeta > -1, |kappa| < 1.
    void validate() const;
    bool is_zero() const;
};

struct FitOptions {
    double c = 0.001;                 // range floor: c <= f <= 1 - c
    int restarts = 10;
    int max_iter = 500;
    double grad_tol = 1e-8;
    double accept_tol = 1e-5;         // gradient sup-norm for a usable, stalled restart
    double f_tol = 1e-12;             // criterion change over 25 iterations counted as converged
    double relevance_penalty = 1e3;   // weight of the |tau1 - tau0| >= c hinge
    std::uint64_t seed = 20240601;
    int jobs = 1;
};

struct FitDiagnostics {
    double loglik = 0.0;     // mean conditional log-likelihood
    double criterion = 0.0;  // negative log-likelihood plus penalty (minimized)
    double grad_norm = 0.0;
    int iterations = 0;
    int restarts_used = 0;
    int restarts_converged = 0;
    int best_restart = -1;
    double relevance_violation = 0.0;  // fraction of sample with |tau1 - tau0| < c
    std::vector<std::string> warnings;
};

struct NuisanceEstimates {
    SeriesFunction tau0;
    SeriesFunction tau1;
    SeriesFunction alpha;
    SeriesFunction beta;
    SensitivityParams sensitivity;
    FitDiagnostics diagnostics;

    Variant variant() const noexcept { return sensitivity.variant; }
    const Basis& basis() const noexcept { return tau0.basis; }
    PointwiseParams at(const std::vector<double>& x) const;
    PointwiseParams at_features(const Eigen::Ref<const Eigen::VectorXd>& phi) const;

    // Stacked coefficients [tau0; tau1; alpha; beta].
    Eigen::VectorXd packed() const;
    static NuisanceEstimates from_packed(const Basis& basis, const Eigen::VectorXd& packed, double c,
                                         SensitivityParams sens);
};

struct ModelProb {
    double p = 0.5;
    double d_tau = 0.0;    // derivative with respect to tau_z
    double d_alpha = 0.0;  // with respect to alpha (s = 0)
    double d_beta = 0.0;   // with respect to beta (s = 1)
};

// f(Y=1 | s, z, x; candidate) under the variant's component functions, with
// sens0/sens1 the variant's parameter values at x. Clamped to
// [1e-12, 1 - 1e-12]; derivatives vanish where the clamp is active.
ModelProb model_prob_grad(const PointwiseParams& xi, int s, int z, Variant variant, double sens0,
                          double sens1);
double model_prob(const PointwiseParams& xi, int s, int z, Variant variant, double sens0 = 0.0,
                  double sens1 = 0.0);

// Precomputed design for the sieve criterion.
class SieveProblem {
public:
    SieveProblem(const Dataset& data, const Basis& basis, SensitivityParams sens, double c,
                 double relevance_penalty);

    std::size_t n() const noexcept { return static_cast<std::size_t>(features_.rows()); }
    std::size_t basis_size() const noexcept { return static_cast<std::size_t>(features_.cols()); }
    const Eigen::MatrixXd& features() const noexcept { return features_; }
    const Basis& basis() const noexcept { return basis_; }
    const SensitivityParams& sensitivity() const noexcept { return sens_; }
    double c() const noexcept { return c_; }

    // Criterion -mean log-likelihood + penalty and its gradient in the
    // stacked coefficients (length 4 J).
    double negloglik_and_grad(const Eigen::VectorXd& packed, Eigen::VectorXd* grad) const;
    double loglik(const Eigen::VectorXd& packed) const;
    double relevance_violation(const Eigen::VectorXd& packed) const;

    // Replaces the features by features * t, so coefficients b of the new
    // problem correspond to t * b in the basis.
    void reparametrize(const Eigen::MatrixXd& t);

private:
    Basis basis_;
    SensitivityParams sens_;
    double c_;
    double lambda_;
    Eigen::MatrixXd features_;
    std::vector<int> s_, z_, y_;
    std::vector<double> sens0_, sens1_;
};

// Sieve maximum likelihood over logistic series for (tau0, tau1, alpha, beta).
// Best of `restarts` BFGS runs; `warm_start`, when given, is tried first.
NuisanceEstimates fit(const Dataset& data, const BasisConfig& basis, const FitOptions& options,
                      const SensitivityParams& sensitivity = SensitivityParams::baseline(),
                      const NuisanceEstimates* warm_start = nullptr);

// tau(z, x) = (1 - z) tau0(x) + z tau1(x).
double predict_tau(const NuisanceEstimates& est, int z, const std::vector<double>& x);
// tau_sz = tau_0z + s kappa_z, clipped to [0,1]; `clipped` reports clipping.
double predict_tau_sz(const NuisanceEstimates& est, int s, int z, const std::vector<double>& x,
                      bool* clipped = nullptr);

std::vector<double> tau_scores(const NuisanceEstimates& est, const Dataset& data);

// t* = sup{t : mean(score >= t) >= target_rate}.
double threshold_preserving_rate(const std::vector<double>& scores, double target_rate);
double threshold_preserving_rate(const NuisanceEstimates& est, const Dataset& data,
                                 double target_rate);

}  // namespace desert
