#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace desert {

// One observed unit O = (S, Z, X, Y).
struct ObservationRecord {
    int s = 0;              // sensitive attribute, 1 = advantaged group
    int z = 0;              // auxiliary variable
    std::vector<double> x;  // nonsensitive covariates
    int y = 0;              // observed decision, 1 = favourable
};

// Affine map of one covariate onto [0,1].
struct CovariateRange {
    double min = 0.0;
    double max = 1.0;
};

struct Scaling {
    std::vector<CovariateRange> ranges;

    // Maps a raw covariate vector into [0,1]^d. Coordinates outside the
    // training range are clamped; `clamped` reports whether that happened.
    std::vector<double> apply(const std::vector<double>& raw, bool* clamped = nullptr) const;

    static Scaling identity(std::size_t d);
};

// Column mapping for CSV ingestion.
struct Schema {
    std::string s = "s";
    std::string z = "z";
    std::string y = "y";
    std::vector<std::string> covariates;  // empty: every column not mapped to s/z/y
    std::vector<std::string> true_tokens{"1"};
    std::vector<std::string> false_tokens{"0"};

    // Parses "s=race,z=quality,y=callback,x=exp,x=jobs" (x may repeat).
    static Schema parse(const std::string& spec);
};

using StratumCounts = std::array<std::array<std::size_t, 2>, 2>;  // [s][z]

class Dataset {
public:
    Dataset() = default;

    // Validates binary s/z/y, a common covariate dimension and min < max for
    // every scaling range.
    Dataset(std::vector<ObservationRecord> records, std::vector<std::string> covariate_names,
            Scaling scaling, bool scaled);

    const std::vector<ObservationRecord>& records() const noexcept { return records_; }
    const ObservationRecord& operator[](std::size_t i) const { return records_[i]; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    std::size_t dim() const noexcept { return names_.size(); }

    const std::vector<std::string>& covariate_names() const noexcept { return names_; }
    const Scaling& scaling() const noexcept { return scaling_; }
    bool scaled() const noexcept { return scaled_; }

    // Column labels used when writing the dataset back out.
    Schema schema;

    // n x d covariate matrix.
    Eigen::MatrixXd covariates() const;
    Eigen::VectorXd outcomes() const;

    // Rows at the given indices, in the given order (duplicates allowed).
    Dataset subset(const std::vector<std::size_t>& rows) const;

private:
    std::vector<ObservationRecord> records_;
    std::vector<std::string> names_;
    Scaling scaling_;
    bool scaled_ = false;
};

// Reads a comma separated file with a header row. Covariates are kept on
// their raw scale; the scaling ranges are computed from the data. An empty
// schema.s or schema.y name means the column is absent and read as 0. With
// `fit_scaling` false the scaling is left as the identity, for rows that will
// be mapped with a stored model's scaling instead.
Dataset load_csv(const std::filesystem::path& path, const Schema& schema, bool fit_scaling = true);

// Inverse of load_csv at full double precision.
void write_csv(const std::filesystem::path& path, const Dataset& data);

// Per-column min-max scaling onto [0,1]. Idempotent: already scaled data is
// returned unchanged.
Dataset scale_covariates(const Dataset& raw);

StratumCounts stratum_counts(const Dataset& data);

// Throws PositivityError naming the first empty (s,z) cell.
void require_positivity(const Dataset& data);

}  // namespace desert
