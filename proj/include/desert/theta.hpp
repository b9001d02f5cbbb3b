#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "desert/data.hpp"
#include "desert/identify.hpp"
#include "desert/regress.hpp"
#include "desert/sievemle.hpp"

namespace desert {

enum class ThetaMethod { plugin, onestep, bootstrap };

std::string to_string(ThetaMethod m);
ThetaMethod theta_method_from_string(const std::string& s);

struct ThetaEstimate {
    double point = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    ThetaMethod method = ThetaMethod::plugin;
    double level = 0.95;
    std::size_t n_used = 0;
    std::size_t excluded = 0;       // observations dropped from the augmentation
    bool out_of_range = false;      // one-step point outside [0,1], reported unclipped
    int replicates = 0;             // bootstrap only
    int failures = 0;               // bootstrap only
    std::vector<std::string> warnings;
};

// Per-observation theta integrand (1-S) tau(Z) alpha + S (1 - tau(Z)) beta.
double theta_integrand(const PointwiseParams& xi, int s, int z);

// Mean of the integrand over the sample. Baseline estimates only.
ThetaEstimate theta_plugin(const NuisanceEstimates& est, const Dataset& data);

// Plug-in that honours the sensitivity variant of `est`:
//   kappa: tau_1z = tau_0z + kappa_z (clipped);
//   delta: (1-S){tau alpha + (1-tau) delta0} + S{(1-tau) beta + tau delta1};
//   zeta:  alpha_z, beta_z from the z = 0 mechanism scaled by (1+zeta)^z.
double theta_plugin_variant(const NuisanceEstimates& est, const Dataset& data);

// C_sz = [d m / d mu_sz] / pi_sz with m(x) = sum_sz pi_sz g_sz(x) and
// (tau0, tau1, alpha, beta) seen as functions of mu through the closed-form
// identification map. Order (C00, C01, C10, C11). Throws WeakAuxiliaryError
// when the identification denominator vanishes at x.
std::array<double, 4> influence_coefficients(const PointwiseParams& xi,
                                             const std::array<double, 4>& pi);

// Units with |tau1 - tau0| below this keep the plug-in term only. C grows like
// 1/|tau1 - tau0|, so without trimming the augmentation has heavy tails; it stays
// conditionally mean-zero under any trimming rule that depends on x alone.
inline constexpr double kRelevanceTrim = 0.01;

// One-step estimator from per-observation nuisance values; pi is indexed by
// stratum_class(s, z).
ThetaEstimate theta_onestep_values(const Dataset& data, const std::vector<PointwiseParams>& xi,
                                   const std::vector<std::array<double, 4>>& pi,
                                   double level = 0.95, double trim = kRelevanceTrim);

ThetaEstimate theta_onestep(const NuisanceEstimates& est, const PropensityModel& prop,
                            const Dataset& data, double level = 0.95,
                            double trim = kRelevanceTrim);

// K-fold cross-fitting: nuisances and propensities are refit on each fold's
// complement and evaluated on the fold.
ThetaEstimate theta_onestep_crossfit(const Dataset& data, const BasisConfig& basis,
                                     const FitOptions& options, int folds, std::uint64_t seed,
                                     double level = 0.95, double trim = kRelevanceTrim);

// Refits the nuisances on a resample; the seed is the replicate's sub-seed.
using Fitter = std::function<NuisanceEstimates(const Dataset&, std::uint64_t)>;

// Nonparametric bootstrap of theta_plugin_variant with percentile CI. The
// point estimate is the plug-in at `full` on the full data.
ThetaEstimate theta_bootstrap(const Fitter& fitter, const NuisanceEstimates& full,
                              const Dataset& data, int replicates, std::uint64_t seed,
                              double level = 0.95, int jobs = 1);

// Convenience: bootstrap refitting with `options` and warm start at `full`.
ThetaEstimate theta_bootstrap(const NuisanceEstimates& full, const Dataset& data,
                              const BasisConfig& basis, const FitOptions& options, int replicates,
                              std::uint64_t seed, double level = 0.95);

double normal_quantile(double p);

}  // namespace desert
