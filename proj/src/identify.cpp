#include "desert/identify.hpp"

#include <cmath>
#include <sstream>

#include "desert/error.hpp"

namespace desert {

namespace {

double relevance_denominator(const PointwiseMu& m) {
    return m.mu01 * (1.0 - m.mu10) - m.mu00 * (1.0 - m.mu11);
}

void require_denominator(double den, const char* what) {
    if (!(std::abs(den) >= kWeakAuxiliaryTol))
        throw WeakAuxiliaryError(std::string(what) +
                                 ": identification denominator is zero; the auxiliary variable "
                                 "does not shift the desert decision");
}

void require_unit_interval(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0))
        throw InvalidIdentificationError(std::string(what) + " produced " + std::to_string(v) +
                                         ", outside [0,1]");
}

}  // namespace

bool is_valid(const PointwiseParams& p, double c) {
    const auto in = [c](double v) { return v >= c && v <= 1.0 - c; };
    return in(p.tau0) && in(p.tau1) && in(p.alpha) && in(p.beta) && std::abs(p.tau1 - p.tau0) >= c;
}

PointwiseMu forward_mu(const PointwiseParams& p) {
    return {p.tau0 * (1.0 - p.alpha), p.tau1 * (1.0 - p.alpha), p.beta + p.tau0 * (1.0 - p.beta),
            p.beta + p.tau1 * (1.0 - p.beta)};
}

TauPair invert_tau(const PointwiseMu& m) {
    const double den = relevance_denominator(m);
    require_denominator(den, "invert_tau");
    const double ratio = (m.mu11 - m.mu10) / den;
    return {m.mu00 * ratio, m.mu01 * ratio};
}

Mechanism recover_mechanism(const PointwiseMu& m, double t0, double t1) {
    if (!(t0 > 0.0 && t0 < 1.0 && t1 > 0.0 && t1 < 1.0))
        throw InvalidIdentificationError("recover_mechanism needs T_0, T_1 in (0,1), got (" +
                                         std::to_string(t0) + ", " + std::to_string(t1) + ")");
    const double a0 = 1.0 - m.mu00 / t0;
    const double a1 = 1.0 - m.mu01 / t1;
    const double b0 = (m.mu10 - t0) / (1.0 - t0);
    const double b1 = (m.mu11 - t1) / (1.0 - t1);
    Mechanism mech;
    mech.alpha = 0.5 * (a0 + a1);
    mech.beta = 0.5 * (b0 + b1);
    mech.alpha_gap = std::abs(a0 - a1);
    mech.beta_gap = std::abs(b0 - b1);
    if (mech.alpha < 0.0) mech.warnings.push_back("alpha < 0: mu_0z exceeds T_z");
    if (mech.beta < 0.0) mech.warnings.push_back("beta < 0: mu_1z below T_z");
    if (mech.alpha >= 1.0) mech.warnings.push_back("alpha >= 1");
    if (mech.beta >= 1.0) mech.warnings.push_back("beta >= 1");
    return mech;
}

Eigen::Matrix4d identification_jacobian(const PointwiseMu& m) {
    const double den = relevance_denominator(m);
    require_denominator(den, "identification_jacobian");
    const double num = m.mu11 - m.mu10;
    if (!(std::abs(num) >= kWeakAuxiliaryTol))
        throw WeakAuxiliaryError("identification_jacobian: mu11 - mu10 vanishes");
    const double r = num / den;

    const Eigen::RowVector4d d_den(-(1.0 - m.mu11), 1.0 - m.mu10, -m.mu01, m.mu00);
    const Eigen::RowVector4d d_num(0.0, 0.0, -1.0, 1.0);
    const Eigen::RowVector4d d_r = (d_num * den - num * d_den) / (den * den);

    Eigen::Matrix4d jac;
    std::array<Eigen::RowVector4d, 2> d_t;
    std::array<double, 2> t{m.mu00 * r, m.mu01 * r};
    for (int z = 0; z < 2; ++z) {
        Eigen::RowVector4d e = Eigen::RowVector4d::Zero();
        e(z) = 1.0;
        d_t[z] = e * r + m.at(0, z) * d_r;
        jac.row(z) = d_t[z];
    }
    // alpha = 1 - mu_0z / T_z = 1 - 1 / r for either z.
    jac.row(2) = d_r / (r * r);
    Eigen::RowVector4d d_beta = Eigen::RowVector4d::Zero();
    for (int z = 0; z < 2; ++z) {
        Eigen::RowVector4d e = Eigen::RowVector4d::Zero();
        e(2 + z) = 1.0;
        const double one_minus_t = 1.0 - t[z];
        d_beta += ((e - d_t[z]) * one_minus_t + (m.at(1, z) - t[z]) * d_t[z]) /
                  (one_minus_t * one_minus_t);
    }
    jac.row(3) = 0.5 * d_beta;
    return jac;
}

std::string ImplicationReport::to_text() const {
    static const char* labels[3] = {"(i)   mu_1z >= mu_0z", "(ii)  mu_s1 != mu_s0",
                                    "(iii) sign(mu11-mu10) == sign(mu01-mu00)"};
    std::ostringstream os;
    os << "Testable implications on " << n << " points (tol " << tol << ", flag above "
       << threshold << ")\n";
    for (int k = 0; k < 3; ++k)
        os << "  " << labels[k] << ": violation fraction " << violation_fraction[k]
           << (flagged[k] ? "  [FLAGGED]" : "") << '\n';
    os << (any_flagged() ? "At least one implication is violated; an identifying assumption may fail.\n"
                         : "No implication exceeds the violation threshold.\n");
    return os.str();
}

ImplicationReport check_testable_implications(const std::vector<PointwiseMu>& points, double tol,
                                              double threshold) {
    ImplicationReport rep;
    rep.n = points.size();
    rep.tol = tol;
    rep.threshold = threshold;
    if (points.empty()) return rep;
    std::array<std::size_t, 3> bad{};
    for (const auto& m : points) {
        if (m.mu10 < m.mu00 - tol || m.mu11 < m.mu01 - tol) ++bad[0];
        if (std::abs(m.mu01 - m.mu00) <= tol || std::abs(m.mu11 - m.mu10) <= tol) ++bad[1];
        const double a = m.mu11 - m.mu10;
        const double b = m.mu01 - m.mu00;
        if ((a > tol && b < -tol) || (a < -tol && b > tol)) ++bad[2];
    }
    for (int k = 0; k < 3; ++k) {
        rep.violation_fraction[k] = static_cast<double>(bad[k]) / points.size();
        rep.flagged[k] = rep.violation_fraction[k] > threshold;
    }
    return rep;
}

ImplicationReport check_testable_implications(const MuModel& mu_hat, const Dataset& data,
                                              double tol, double threshold) {
    std::vector<PointwiseMu> points;
    points.reserve(data.size());
    for (const auto& r : data.records()) {
        points.push_back({predict_mu(mu_hat, 0, 0, r.x), predict_mu(mu_hat, 0, 1, r.x),
                          predict_mu(mu_hat, 1, 0, r.x), predict_mu(mu_hat, 1, 1, r.x)});
    }
    return check_testable_implications(points, tol, threshold);
}

PointwiseMu forward_mu_kappa(const PointwiseParams& p, double kappa0, double kappa1) {
    return {p.tau0 * (1.0 - p.alpha), p.tau1 * (1.0 - p.alpha),
            p.beta + (p.tau0 + kappa0) * (1.0 - p.beta), p.beta + (p.tau1 + kappa1) * (1.0 - p.beta)};
}

TauKappa invert_tau_kappa(const PointwiseMu& m, double kappa0, double kappa1) {
    const double den = relevance_denominator(m);
    require_denominator(den, "invert_tau_kappa");
    TauKappa out;
    for (int z = 0; z < 2; ++z) {
        const double mu0z = m.at(0, z);
        // Same operation order as invert_tau so zero kappa reproduces it bit for bit.
        const double ratio =
            (m.mu11 - m.mu10 + kappa0 * (1.0 - m.mu11) - kappa1 * (1.0 - m.mu10)) / den;
        const double base = mu0z * ratio;
        const double kz = z == 0 ? kappa0 : kappa1;
        out.tau[0][z] = base;
        out.tau[1][z] = base + kz;
        require_unit_interval(out.tau[0][z], "invert_tau_kappa");
        require_unit_interval(out.tau[1][z], "invert_tau_kappa");
    }
    return out;
}

PointwiseMu forward_mu_delta(const PointwiseParams& p, double delta0, double delta1) {
    return {delta0 + p.tau0 * (1.0 - delta0 - p.alpha), delta0 + p.tau1 * (1.0 - delta0 - p.alpha),
            p.beta + p.tau0 * (1.0 - delta1 - p.beta), p.beta + p.tau1 * (1.0 - delta1 - p.beta)};
}

TauPair invert_tau_delta(const PointwiseMu& m, double delta0, double delta1) {
    const double den = relevance_denominator(m) - delta0 * (m.mu11 - m.mu10) -
                       delta1 * (m.mu01 - m.mu00);
    require_denominator(den, "invert_tau_delta");
    if (m.mu00 < delta0 || m.mu01 < delta0)
        throw InvalidIdentificationError(
            "invert_tau_delta: mu_0z below delta0 gives a negative numerator");
    const double ratio = (m.mu11 - m.mu10) / den;
    return {(m.mu00 - delta0) * ratio, (m.mu01 - delta0) * ratio};
}

PointwiseMu forward_mu_zeta(const PointwiseParams& p, double zeta0, double zeta1) {
    const double a = 1.0 - p.alpha;
    const double b = 1.0 - p.beta;
    return {p.tau0 * a, (1.0 + zeta0) * p.tau1 * a, 1.0 - (1.0 - p.tau0) * b,
            1.0 - (1.0 + zeta1) * (1.0 - p.tau1) * b};
}

TauPair invert_tau_zeta(const PointwiseMu& m, double zeta0, double zeta1) {
    if (!(zeta0 > -1.0 && zeta1 > -1.0))
        throw InvalidArgument("invert_tau_zeta: zeta must exceed -1");
    const double den =
        (1.0 + zeta1) * m.mu01 * (1.0 - m.mu10) - (1.0 + zeta0) * m.mu00 * (1.0 - m.mu11);
    require_denominator(den, "invert_tau_zeta");
    const double common = m.mu11 - m.mu10 + zeta1 * (1.0 - m.mu10);
    const double ratio = common / den;
    TauPair out{(1.0 + zeta0) * m.mu00 * ratio, m.mu01 * ratio};
    require_unit_interval(out.t0, "invert_tau_zeta");
    require_unit_interval(out.t1, "invert_tau_zeta");
    return out;
}

double bias_linearization(double tau_z, double alpha, double beta, double delta0, double delta1) {
    if (!(alpha < 1.0 && beta < 1.0)) throw InvalidArgument("bias_linearization needs alpha, beta < 1");
    return delta0 * (1.0 - tau_z) / (1.0 - alpha) - delta1 * tau_z / (1.0 - beta);
}

}  // namespace desert
