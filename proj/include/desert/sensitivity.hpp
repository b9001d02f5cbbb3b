#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "desert/basis.hpp"
#include "desert/data.hpp"
#include "desert/sievemle.hpp"
#include "desert/theta.hpp"

namespace desert {

struct SweepSpec {
    Variant variant = Variant::delta;
    std::vector<SensitivityParams> grid;
    bool reuse_warm_start = true;
    int boot = 200;               // bootstrap replicates per point; 0 gives the plug-in only
    double level = 0.95;
    std::optional<double> rate;   // classifier positive rate; defaults to the observed mean of Y
    double cold_check_fraction = 0.10;

    void validate() const;
};

// delta, zeta: (v, v) for v in {0, 0.025, 0.05, 0.1}; kappa: {-0.05, 0, 0.05}^2.
std::vector<SensitivityParams> default_grid(Variant variant);

struct SweepRow {
    SensitivityParams params;
    bool ok = false;
    std::string error;
    FitDiagnostics diagnostics;
    ThetaEstimate theta;
    double mean_abs_tau_diff = 0.0;  // mean over the sample of |tau_variant - tau_baseline|
    double flip_rate = 0.0;
    bool cold_checked = false;
    bool cold_improved = false;      // cold start found a better optimum than the warm path
};

struct SweepTable {
    Variant variant = Variant::delta;
    double rate = 0.0;
    FitDiagnostics baseline;
    double baseline_theta = 0.0;
    std::vector<SweepRow> rows;  // in grid order
};

SweepTable run_sweep(const Dataset& data, const BasisConfig& basis, const FitOptions& options,
                     const SweepSpec& spec);

// Fraction of units whose rate-preserving classifications differ.
double flip_rate(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                 double rate);

void write_sweep_csv(const std::filesystem::path& path, const SweepTable& table);

}  // namespace desert
