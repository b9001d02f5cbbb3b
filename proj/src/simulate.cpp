#include "desert/simulate.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <boost/math/quadrature/gauss.hpp>

#include "desert/baselines.hpp"
#include "desert/error.hpp"
#include "desert/parallel.hpp"
#include "desert/regress.hpp"
#include "desert/theta.hpp"

namespace desert {

void DgpConfig::validate() const {
    if (n < 100) throw InvalidArgument("simulation sample size must be at least 100");
    if (!(delta >= 0.0 && delta < 0.5)) throw InvalidArgument("dgp delta must lie in [0, 0.5)");
    if (zeta0 <= -1.0 || zeta1 <= -1.0) throw InvalidArgument("zeta must exceed -1");
}

namespace dgp {
double tau0(double x1, double x2) { return expit(-3.0 + 5.0 * x1 + std::sin(x2)); }
double tau1(double x1, double x2) { return expit(-3.0 + x1 + 6.0 * std::sin(x2)); }
double alpha(double x1, double x2) { return expit(-1.0 - std::sin(x1) + 2.0 * std::exp(-x2)); }
double beta(double x1, double x2) { return expit(-1.0 + 2.0 * std::exp(-x1) - x2); }
double prob_s(double x1, double x2) { return expit(2.0 - 2.0 * std::sin(x1) - 2.0 * x2); }
double prob_z(double x1, double x2) { return expit(1.0 - x1 - std::sin(x2)); }

PointwiseParams params(double x1, double x2) {
    return {tau0(x1, x2), tau1(x1, x2), alpha(x1, x2), beta(x1, x2)};
}

std::array<double, 4> propensity(double x1, double x2) {
    const double ps = prob_s(x1, x2);
    const double pz = prob_z(x1, x2);
    return {(1 - ps) * (1 - pz), (1 - ps) * pz, ps * (1 - pz), ps * pz};
}
}  // namespace dgp

namespace {

struct Mechanism2 {
    double tau;    // f(Y*=1 | s, z, x)
    double up;     // f(Y=1 | Y*=0, s, z, x)
    double down;   // f(Y=0 | Y*=1, s, z, x)
};

Mechanism2 mechanism(const DgpConfig& c, int s, int z, double x1, double x2) {
    double tau = z == 0 ? dgp::tau0(x1, x2) : dgp::tau1(x1, x2);
    if (s == 1) tau = std::clamp(tau + c.s_effect, 0.0, 1.0);
    if (s == 0) {
        const double k = z == 0 ? 1.0 : 1.0 + c.zeta0;
        const double a = std::clamp(1.0 - k * (1.0 - dgp::alpha(x1, x2)), 0.0, 1.0);
        return {tau, c.delta, a};
    }
    const double k = z == 0 ? 1.0 : 1.0 + c.zeta1;
    const double b = std::clamp(1.0 - k * (1.0 - dgp::beta(x1, x2)), 0.0, 1.0);
    return {tau, b, c.delta};
}

}  // namespace

SimulatedData gen_dataset(const DgpConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ObservationRecord> records(config.n);
    SimulatedData out;
    out.y_star.resize(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
        const double x1 = u(rng);
        const double x2 = u(rng);
        auto& r = records[i];
        r.x = {x1, x2};
        r.s = u(rng) < dgp::prob_s(x1, x2) ? 1 : 0;
        r.z = u(rng) < dgp::prob_z(x1, x2) ? 1 : 0;
        const Mechanism2 m = mechanism(config, r.s, r.z, x1, x2);
        const int ystar = u(rng) < m.tau ? 1 : 0;
        const double flip = u(rng);
        r.y = ystar ? (flip < m.down ? 0 : 1) : (flip < m.up ? 1 : 0);
        out.y_star[i] = ystar;
    }
    out.data = Dataset(std::move(records), {"x1", "x2"}, Scaling::identity(2), true);
    return out;
}

double true_theta(const DgpConfig& config) {
    config.validate();
    using Rule = boost::math::quadrature::gauss<double, 40>;
    const auto inner = [&](double x1) {
        return Rule::integrate(
            [&](double x2) {
                const double ps = dgp::prob_s(x1, x2);
                const double pz = dgp::prob_z(x1, x2);
                double total = 0.0;
                for (int s = 0; s < 2; ++s)
                    for (int z = 0; z < 2; ++z) {
                        const double w = (s ? ps : 1 - ps) * (z ? pz : 1 - pz);
                        const Mechanism2 m = mechanism(config, s, z, x1, x2);
                        total += w * (m.tau * m.down + (1.0 - m.tau) * m.up);
                    }
                return total;
            },
            0.0, 1.0);
    };
    return Rule::integrate(inner, 0.0, 1.0);
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Midranks over tied blocks.
    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j + 1);
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]]) {
                rank_sum += mid;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw InvalidArgument("AUC is undefined when only one class is present");
    const double np = static_cast<double>(n_pos);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::string to_string(Method m) {
    switch (m) {
        case Method::dsd: return "DSD";
        case Method::uml: return "UML";
        case Method::ftu: return "FTU";
        case Method::mlc: return "MLC";
        case Method::ld: return "LD";
    }
    return "DSD";
}

Method method_from_string(const std::string& s) {
    std::string t = s;
    for (auto& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (Method m : kAllMethods)
        if (to_string(m) == t) return m;
    throw InvalidArgument("unknown method '" + s + "' (expected DSD, UML, FTU, MLC or LD)");
}

BasisConfig simulation_basis() {
    BasisConfig c = BasisConfig::default_for(2);
    c.interaction_order = 1;
    return c;
}

ReplicationResult run_replication(const MonteCarloConfig& config, int rep, double theta_true) {
    ReplicationResult res;
    res.rep = rep;
    res.seed = derive_seed(config.dgp.seed, static_cast<std::uint64_t>(rep));
    res.auc_ystar.fill(std::numeric_limits<double>::quiet_NaN());
    res.auc_y.fill(std::numeric_limits<double>::quiet_NaN());
    try {
        DgpConfig train_cfg = config.dgp;
        train_cfg.seed = derive_seed(res.seed, 0);
        DgpConfig test_cfg = config.dgp;
        test_cfg.seed = derive_seed(res.seed, 1);
        test_cfg.n = std::max<std::size_t>(config.test_size, 100);
        const SimulatedData train = gen_dataset(train_cfg);
        const SimulatedData test = gen_dataset(test_cfg);
        std::vector<int> test_y(test.data.size());
        for (std::size_t i = 0; i < test_y.size(); ++i) test_y[i] = test.data[i].y;

        const auto record = [&](Method m, const std::vector<double>& scores) {
            const auto k = static_cast<std::size_t>(m);
            res.auc_ystar[k] = auc(scores, test.y_star);
            res.auc_y[k] = auc(scores, test_y);
        };
        const auto to_vec = [](const Eigen::VectorXd& v) {
            return std::vector<double>(v.data(), v.data() + v.size());
        };

        const int bd = config.baseline_degree;
        const int bo = config.baseline_interaction_order;
        for (Method m : config.methods) {
            switch (m) {
                case Method::dsd: {
                    FitOptions fo = config.fit;
                    fo.seed = derive_seed(res.seed, 2);
                    fo.jobs = 1;
                    const NuisanceEstimates est = fit(train.data, config.basis, fo);
                    const std::vector<double> scores = tau_scores(est, test.data);
                    record(m, scores);
                    double sq = 0.0;
                    for (std::size_t i = 0; i < scores.size(); ++i) {
                        const auto& r = test.data[i];
                        const double t = r.z == 0 ? dgp::tau0(r.x[0], r.x[1]) : dgp::tau1(r.x[0], r.x[1]);
                        sq += (scores[i] - t) * (scores[i] - t);
                    }
                    res.tau_l2 = std::sqrt(sq / static_cast<double>(scores.size()));
                    res.theta_plugin = theta_plugin(est, train.data).point;
                    res.theta_hat = res.theta_plugin;
                    if (config.inference) {
                        const PropensityModel prop = fit_propensity(train.data, config.basis);
                        const ThetaEstimate th = theta_onestep(est, prop, train.data, config.level, config.trim);
                        res.theta_hat = th.point;
                        res.ci_low = th.ci_low;
                        res.ci_high = th.ci_high;
                        res.excluded = th.excluded;
                        res.covered = th.ci_low <= theta_true && theta_true <= th.ci_high;
                    }
                    break;
                }
                case Method::uml:
                    record(m, to_vec(fit_uml(train.data, bd, bo).eval_rows(test.data)));
                    break;
                case Method::ftu:
                    record(m, to_vec(fit_ftu(train.data, bd, bo).eval_rows(test.data)));
                    break;
                case Method::mlc:
                    record(m, to_vec(fit_mlc(train.data, bd, bo).eval_rows(test.data)));
                    break;
                case Method::ld:
                    record(m, to_vec(fit_ld(train.data, bd, bo).eval_rows(test.data)));
                    break;
            }
        }
        res.ok = true;
    } catch (const Error& e) {
        res.ok = false;
        res.error = e.what();
    }
    return res;
}

namespace {

// Kahan-compensated running mean and variance over a fixed sequence.
struct Accumulator {
    double sum = 0.0, comp = 0.0;
    std::vector<double> values;

    void add(double v) {
        values.push_back(v);
        const double y = v - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    double mean() const { return values.empty() ? 0.0 : sum / static_cast<double>(values.size()); }
    double sd() const {
        if (values.size() < 2) return 0.0;
        const double m = mean();
        double ss = 0.0;
        for (double v : values) ss += (v - m) * (v - m);
        return std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
};

}  // namespace

MonteCarloSummary monte_carlo(const MonteCarloConfig& config) {
    if (config.reps < 1) throw InvalidArgument("reps must be at least 1");
    config.dgp.validate();
    const auto t0 = std::chrono::steady_clock::now();

    MonteCarloSummary s;
    s.config = config;
    s.theta_true = true_theta(config.dgp);
    s.reps = config.reps;
    s.replications.resize(static_cast<std::size_t>(config.reps));
    parallel_for(s.replications.size(), config.jobs, [&](std::size_t r) {
        s.replications[r] = run_replication(config, static_cast<int>(r), s.theta_true);
    });

    std::array<Accumulator, 5> a_star, a_y;
    Accumulator l2, bias, cover, gap;
    const bool has_dsd = std::find(config.methods.begin(), config.methods.end(), Method::dsd) !=
                         config.methods.end();
    const bool has_uml = std::find(config.methods.begin(), config.methods.end(), Method::uml) !=
                         config.methods.end();
    for (const auto& r : s.replications) {
        if (!r.ok) {
            ++s.failures;
            continue;
        }
        for (Method m : config.methods) {
            const auto k = static_cast<std::size_t>(m);
            a_star[k].add(r.auc_ystar[k]);
            a_y[k].add(r.auc_y[k]);
        }
        if (has_dsd) {
            l2.add(r.tau_l2);
            bias.add(r.theta_hat - s.theta_true);
            if (config.inference) cover.add(r.covered ? 1.0 : 0.0);
            if (has_uml)
                gap.add(r.auc_ystar[0] - r.auc_ystar[1] > 0.15 ? 1.0 : 0.0);
        }
    }
    for (Method m : config.methods) {
        const auto k = static_cast<std::size_t>(m);
        s.methods[k] = {a_star[k].mean(), a_star[k].sd(), a_y[k].mean(), a_y[k].sd(),
                        static_cast<int>(a_star[k].values.size())};
    }
    s.tau_l2_mean = l2.mean();
    s.tau_l2_sd = l2.sd();
    s.theta_bias = bias.mean();
    s.theta_sd = bias.sd();
    s.coverage = cover.mean();
    s.gap_fraction = gap.mean();
    s.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

namespace {

std::string num(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

}  // namespace

void write_summary_csv(const std::filesystem::path& path, const MonteCarloSummary& s) {
    auto out = open_out(path);
    out << "n,delta,method,auc_ystar_mean,auc_ystar_sd,auc_y_mean,auc_y_sd,replications\n";
    for (Method m : s.config.methods) {
        const auto& ms = s.methods[static_cast<std::size_t>(m)];
        out << s.config.dgp.n << ',' << num(s.config.dgp.delta) << ',' << to_string(m) << ','
            << num(ms.auc_ystar_mean) << ',' << num(ms.auc_ystar_sd) << ',' << num(ms.auc_y_mean)
            << ',' << num(ms.auc_y_sd) << ',' << ms.count << '\n';
    }
}

void write_coverage_csv(const std::filesystem::path& path, const MonteCarloSummary& s) {
    auto out = open_out(path);
    out << "n,delta,replications,failures,theta_true,theta_bias,theta_sd,coverage,tau_l2_mean,"
           "tau_l2_sd,gap_fraction\n";
    out << s.config.dgp.n << ',' << num(s.config.dgp.delta) << ',' << s.reps << ',' << s.failures
        << ',' << num(s.theta_true) << ',' << num(s.theta_bias) << ',' << num(s.theta_sd) << ','
        << num(s.coverage) << ',' << num(s.tau_l2_mean) << ',' << num(s.tau_l2_sd) << ','
        << num(s.gap_fraction) << '\n';
}

void write_replications_csv(const std::filesystem::path& path, const MonteCarloSummary& s) {
    auto out = open_out(path);
    out << "rep,ok,method,target,auc\n";
    for (const auto& r : s.replications) {
        for (Method m : s.config.methods) {
            const auto k = static_cast<std::size_t>(m);
            out << r.rep << ',' << (r.ok ? 1 : 0) << ',' << to_string(m) << ",ystar,"
                << num(r.auc_ystar[k]) << '\n';
            out << r.rep << ',' << (r.ok ? 1 : 0) << ',' << to_string(m) << ",y,"
                << num(r.auc_y[k]) << '\n';
        }
    }
}

void write_figure_csv(const std::filesystem::path& path, const MonteCarloSummary& s) {
    auto out = open_out(path);
    out << "rep,n,delta,ok,tau_l2,theta_hat,theta_bias,ci_low,ci_high,covered,excluded\n";
    for (const auto& r : s.replications) {
        out << r.rep << ',' << s.config.dgp.n << ',' << num(s.config.dgp.delta) << ','
            << (r.ok ? 1 : 0) << ',';
        if (r.ok)
            out << num(r.tau_l2) << ',' << num(r.theta_hat) << ',' << num(r.theta_hat - s.theta_true)
                << ',' << num(r.ci_low) << ',' << num(r.ci_high) << ',' << (r.covered ? 1 : 0)
                << ',' << r.excluded << '\n';
        else
            out << ",,,,,,\n";
    }
}

}  // namespace desert
