#include "desert/basis.hpp"

#include <algorithm>
#include <numeric>

#include "desert/error.hpp"

namespace desert {

std::string to_string(BasisFamily f) {
    return f == BasisFamily::polynomial ? "polynomial" : "bspline";
}

BasisFamily basis_family_from_string(const std::string& s) {
    if (s == "polynomial") return BasisFamily::polynomial;
    if (s == "bspline") return BasisFamily::bspline;
    throw InvalidArgument("unknown basis family '" + s + "'");
}

BasisConfig BasisConfig::default_for(std::size_t d) {
    BasisConfig c;
    c.interaction_order = d > 4 ? 1 : static_cast<int>(std::min<std::size_t>(2, d));
    return c;
}

bool operator==(const BasisConfig& a, const BasisConfig& b) {
    return a.family == b.family && a.degree == b.degree &&
           a.interaction_order == b.interaction_order &&
           a.include_intercept == b.include_intercept && a.knots == b.knots &&
           a.max_power == b.max_power;
}

std::vector<double> bspline_values(double x, int degree, int interior_knots) {
    const int m = interior_knots + degree + 1;
    // Clamped uniform knot vector on [0,1].
    std::vector<double> t;
    t.reserve(m + degree + 1);
    for (int i = 0; i <= degree; ++i) t.push_back(0.0);
    for (int k = 1; k <= interior_knots; ++k) t.push_back(static_cast<double>(k) / (interior_knots + 1));
    for (int i = 0; i <= degree; ++i) t.push_back(1.0);

    x = std::clamp(x, 0.0, 1.0);
    // Degree-0 indicators; the right endpoint belongs to the last span.
    std::vector<double> b(t.size() - 1, 0.0);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if (t[i] < t[i + 1] && ((x >= t[i] && x < t[i + 1]) || (x == 1.0 && t[i + 1] == 1.0))) {
            b[i] = 1.0;
            break;
        }
    }
    for (int p = 1; p <= degree; ++p) {
        for (std::size_t i = 0; i + p + 1 < t.size(); ++i) {
            double v = 0.0;
            const double l = t[i + p] - t[i];
            const double r = t[i + p + 1] - t[i + 1];
            if (l > 0.0) v += (x - t[i]) / l * b[i];
            if (r > 0.0) v += (t[i + p + 1] - x) / r * b[i + 1];
            b[i] = v;
        }
    }
    b.resize(m);
    return b;
}

Basis::Basis(BasisConfig config, std::size_t dim) : config_(std::move(config)), dim_(dim) {
    if (config_.degree < 1) throw InvalidArgument("basis degree must be >= 1");
    if (config_.interaction_order < 0 || static_cast<std::size_t>(config_.interaction_order) > dim)
        throw InvalidArgument("interaction order must lie in [0, d]");
    if (!config_.max_power.empty() && config_.max_power.size() != dim)
        throw DimensionError("max_power has the wrong length");
    if (config_.family == BasisFamily::bspline && config_.knots < 0)
        throw InvalidArgument("knot count must be >= 0");

    caps_.assign(dim, 0);
    for (std::size_t j = 0; j < dim; ++j) {
        const int limit = config_.max_power.empty() ? config_.degree : config_.max_power[j];
        if (config_.family == BasisFamily::polynomial) {
            caps_[j] = std::min(config_.degree, std::max(limit, 0));
        } else {
            // A capped coordinate enters linearly (index 0); otherwise the
            // spline functions 1..m-1 (the first one is dropped because the
            // full set sums to the intercept).
            caps_[j] = limit < config_.degree ? 0 : config_.knots + config_.degree;
        }
    }

    const int io = config_.interaction_order;
    if (config_.include_intercept) terms_.push_back({});

    if (config_.family == BasisFamily::polynomial) {
        const int max_total = std::max(config_.degree, io);
        // Graded lexicographic: total degree, then exponent vectors in
        // decreasing lexicographic order.
        std::vector<std::vector<int>> exps;
        std::vector<int> e(dim, 0);
        auto rec = [&](auto&& self, std::size_t j, int total, int active) -> void {
            if (j == dim) {
                if (total > 0) exps.push_back(e);
                return;
            }
            for (int p = 0; p <= caps_[j]; ++p) {
                const int na = active + (p > 0 ? 1 : 0);
                if (total + p > max_total || na > io) break;
                e[j] = p;
                self(self, j + 1, total + p, na);
            }
            e[j] = 0;
        };
        if (io > 0) rec(rec, 0, 0, 0);
        std::stable_sort(exps.begin(), exps.end(), [](const auto& a, const auto& b) {
            const int ta = std::accumulate(a.begin(), a.end(), 0);
            const int tb = std::accumulate(b.begin(), b.end(), 0);
            if (ta != tb) return ta < tb;
            return a > b;
        });
        for (const auto& ex : exps) {
            BasisTerm term;
            for (std::size_t j = 0; j < dim; ++j)
                if (ex[j] > 0) term.emplace_back(static_cast<int>(j), ex[j]);
            terms_.push_back(std::move(term));
        }
    } else {
        // Products over k distinct coordinates, k = 1..io; coordinates in
        // increasing order, then spline indices lexicographically.
        for (int k = 1; k <= io; ++k) {
            std::vector<int> coords(k);
            auto choose = [&](auto&& self, int pos, int start) -> void {
                if (pos == k) {
                    std::vector<int> idx(k, 0);
                    auto fill = [&](auto&& inner, int q) -> void {
                        if (q == k) {
                            BasisTerm term;
                            for (int r = 0; r < k; ++r) term.emplace_back(coords[r], idx[r]);
                            terms_.push_back(std::move(term));
                            return;
                        }
                        const int cap = caps_[coords[q]];
                        if (cap == 0) {
                            idx[q] = 0;
                            inner(inner, q + 1);
                        } else {
                            for (int v = 1; v <= cap; ++v) {
                                idx[q] = v;
                                inner(inner, q + 1);
                            }
                        }
                    };
                    fill(fill, 0);
                    return;
                }
                for (int c = start; c < static_cast<int>(dim); ++c) {
                    coords[pos] = c;
                    self(self, pos + 1, c + 1);
                }
            };
            choose(choose, 0, 0);
        }
    }
    if (terms_.empty()) throw InvalidArgument("basis configuration yields no functions");
}

void Basis::univariate(int coord, double v, std::vector<double>& out) const {
    const int cap = caps_[coord];
    if (config_.family == BasisFamily::polynomial) {
        out.assign(cap + 1, 1.0);
        for (int p = 1; p <= cap; ++p) out[p] = out[p - 1] * v;
    } else if (cap == 0) {
        out.assign(1, v);
    } else {
        out = bspline_values(v, config_.degree, config_.knots);
    }
}

Eigen::VectorXd Basis::expand(const std::vector<double>& x) const {
    if (x.size() != dim_)
        throw DimensionError("covariate vector has " + std::to_string(x.size()) +
                             " entries, basis expects " + std::to_string(dim_));
    std::vector<std::vector<double>> uni(dim_);
    for (std::size_t j = 0; j < dim_; ++j) univariate(static_cast<int>(j), x[j], uni[j]);
    Eigen::VectorXd phi(terms_.size());
    for (std::size_t k = 0; k < terms_.size(); ++k) {
        double v = 1.0;
        for (const auto& [c, i] : terms_[k]) v *= uni[c][i];
        phi(k) = v;
    }
    return phi;
}

Eigen::VectorXd Basis::expand(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return expand(std::vector<double>(x.data(), x.data() + x.size()));
}

Eigen::MatrixXd Basis::expand_rows(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != dim_)
        throw DimensionError("covariate matrix has " + std::to_string(x.cols()) +
                             " columns, basis expects " + std::to_string(dim_));
    Eigen::MatrixXd out(x.rows(), terms_.size());
    std::vector<double> row(dim_);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < dim_; ++j) row[j] = x(i, j);
        out.row(i) = expand(row).transpose();
    }
    return out;
}

Eigen::VectorXd expand(const std::vector<double>& x, const BasisConfig& config) {
    return Basis(config, x.size()).expand(x);
}

double SeriesFunction::eval_features(const Eigen::Ref<const Eigen::VectorXd>& phi) const {
    if (phi.size() != gamma.size()) throw DimensionError("feature/coefficient length mismatch");
    return floor + (1.0 - 2.0 * floor) * expit(gamma.dot(phi));
}

double SeriesFunction::eval(const std::vector<double>& x) const {
    return eval_features(basis.expand(x));
}

Eigen::VectorXd SeriesFunction::eval_rows(const Eigen::MatrixXd& features) const {
    if (features.cols() != gamma.size()) throw DimensionError("feature/coefficient length mismatch");
    Eigen::VectorXd eta = features * gamma;
    return eta.unaryExpr([this](double t) { return floor + (1.0 - 2.0 * floor) * expit(t); });
}

SeriesFunction SeriesFunction::constant(const Basis& basis, double value, double floor) {
    SeriesFunction f;
    f.basis = basis;
    f.floor = floor;
    f.gamma = Eigen::VectorXd::Zero(basis.size());
    const double u = (value - floor) / (1.0 - 2.0 * floor);
    if (basis.config().include_intercept) f.gamma(0) = logit(u);
    return f;
}

double eval_series(const SeriesFunction& f, const std::vector<double>& x) { return f.eval(x); }

}  // namespace desert
