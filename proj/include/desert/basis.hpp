#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace desert {

enum class BasisFamily { polynomial, bspline };

std::string to_string(BasisFamily f);
BasisFamily basis_family_from_string(const std::string& s);

struct BasisConfig {
    BasisFamily family = BasisFamily::polynomial;
    // Polynomial: largest power of a single covariate. B-spline: spline degree.
    int degree = 3;
    // Largest number of distinct covariates multiplied together in one term.
    int interaction_order = 2;
    bool include_intercept = true;
    // Interior knots per coordinate (B-spline family only).
    int knots = 2;
    // Optional per-coordinate cap on the power (1 for 0/1 dummy columns).
    std::vector<int> max_power;

    // Degree-3 polynomial; pairwise interactions for d <= 4, none beyond.
    static BasisConfig default_for(std::size_t d);
};

bool operator==(const BasisConfig& a, const BasisConfig& b);

// One basis function: product over (coordinate, index) factors. For the
// polynomial family the index is the power; for B-splines it selects the
// univariate spline function (index 0 means the identity map x_j).
using BasisTerm = std::vector<std::pair<int, int>>;

// The sieve basis phi(x) for a fixed covariate dimension.
class Basis {
public:
    Basis() = default;
    Basis(BasisConfig config, std::size_t dim);

    const BasisConfig& config() const noexcept { return config_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<BasisTerm>& terms() const noexcept { return terms_; }

    Eigen::VectorXd expand(const std::vector<double>& x) const;
    Eigen::VectorXd expand(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    // Row-wise expansion of an n x d matrix into n x J features.
    Eigen::MatrixXd expand_rows(const Eigen::MatrixXd& x) const;

private:
    void univariate(int coord, double v, std::vector<double>& out) const;

    BasisConfig config_;
    std::size_t dim_ = 0;
    std::vector<BasisTerm> terms_;
    std::vector<int> caps_;  // per-coordinate highest univariate index
};

Eigen::VectorXd expand(const std::vector<double>& x, const BasisConfig& config);

// Cubic (or degree-p) B-spline values on uniform knots over [0,1]; returns
// all knots + degree + 1 functions, which sum to one.
std::vector<double> bspline_values(double x, int degree, int interior_knots);

inline double expit(double t) {
    if (t >= 0.0) {
        const double e = std::exp(-t);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// A probability-valued function floor + (1 - 2 floor) * expit(gamma' phi(x)).
// floor = 0 gives the plain logistic series.
struct SeriesFunction {
    Basis basis;
    Eigen::VectorXd gamma;
    double floor = 0.0;

    double eval(const std::vector<double>& x) const;
    double eval_features(const Eigen::Ref<const Eigen::VectorXd>& phi) const;
    Eigen::VectorXd eval_rows(const Eigen::MatrixXd& features) const;

    // Constant function equal to `value` everywhere.
    static SeriesFunction constant(const Basis& basis, double value, double floor = 0.0);
};

double eval_series(const SeriesFunction& f, const std::vector<double>& x);

}  // namespace desert
