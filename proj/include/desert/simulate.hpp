#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "desert/basis.hpp"
#include "desert/data.hpp"
#include "desert/identify.hpp"
#include "desert/sievemle.hpp"
#include "desert/theta.hpp"

namespace desert {

struct DgpConfig {
    std::size_t n = 2000;
    double delta = 0.0;        // f(Y=1|Y*=0,S=0) = f(Y=0|Y*=1,S=1) = delta
    std::uint64_t seed = 1;
    double s_effect = 0.0;     // additive shift of f(Y*=1|...) for S = 1, clipped to [0,1]
    double zeta0 = 0.0;        // 1 - alpha_1 = (1 + zeta0)(1 - alpha_0)
    double zeta1 = 0.0;        // 1 - beta_1 = (1 + zeta1)(1 - beta_0)

    void validate() const;
};

// True component functions of the simulation design at x = (x1, x2).
namespace dgp {
double tau0(double x1, double x2);
double tau1(double x1, double x2);
double alpha(double x1, double x2);
double beta(double x1, double x2);
double prob_s(double x1, double x2);
double prob_z(double x1, double x2);
PointwiseParams params(double x1, double x2);
// pi_sz with S and Z independent given X; index stratum_class(s, z).
std::array<double, 4> propensity(double x1, double x2);
}  // namespace dgp

struct SimulatedData {
    Dataset data;              // covariates already on [0,1]
    std::vector<int> y_star;   // latent desert decisions, evaluation only
};

SimulatedData gen_dataset(const DgpConfig& config);

// f(Y != Y*) under the design, by tensor Gauss-Legendre quadrature.
double true_theta(const DgpConfig& config);

// Mann-Whitney AUC with half credit for ties.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Degree-3 polynomial without interactions, J = 7 for two covariates.
BasisConfig simulation_basis();

enum class Method { dsd, uml, ftu, mlc, ld };
inline constexpr std::array<Method, 5> kAllMethods{Method::dsd, Method::uml, Method::ftu,
                                                   Method::mlc, Method::ld};
std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct MonteCarloConfig {
    DgpConfig dgp;
    int reps = 100;
    int jobs = 1;
    std::size_t test_size = 100000;
    std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
    bool inference = true;     // one-step CI and coverage for DSD
    double trim = kRelevanceTrim;
    BasisConfig basis = simulation_basis();
    int baseline_degree = 3;
    int baseline_interaction_order = 2;
    FitOptions fit;
    double level = 0.95;
};

struct ReplicationResult {
    int rep = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::array<double, 5> auc_ystar{};  // by Method; NaN when not run
    std::array<double, 5> auc_y{};
    double tau_l2 = 0.0;
    double theta_plugin = 0.0;
    double theta_hat = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool covered = false;
    std::size_t excluded = 0;
};

ReplicationResult run_replication(const MonteCarloConfig& config, int rep, double theta_true);

struct MethodSummary {
    double auc_ystar_mean = 0.0, auc_ystar_sd = 0.0;
    double auc_y_mean = 0.0, auc_y_sd = 0.0;
    int count = 0;
};

struct MonteCarloSummary {
    MonteCarloConfig config;
    double theta_true = 0.0;
    int reps = 0;
    int failures = 0;
    std::array<MethodSummary, 5> methods{};
    double tau_l2_mean = 0.0, tau_l2_sd = 0.0;
    double theta_bias = 0.0, theta_sd = 0.0;
    double coverage = 0.0;
    double gap_fraction = 0.0;  // share of replications with DSD - UML AUC(Y*) > 0.15
    double runtime_seconds = 0.0;
    std::vector<ReplicationResult> replications;
};

MonteCarloSummary monte_carlo(const MonteCarloConfig& config);

// Method-by-metric table, coverage table, long-format replications and
// per-replication data for tau-error and theta-bias box plots.
void write_summary_csv(const std::filesystem::path& path, const MonteCarloSummary& s);
void write_coverage_csv(const std::filesystem::path& path, const MonteCarloSummary& s);
void write_replications_csv(const std::filesystem::path& path, const MonteCarloSummary& s);
void write_figure_csv(const std::filesystem::path& path, const MonteCarloSummary& s);

}  // namespace desert
