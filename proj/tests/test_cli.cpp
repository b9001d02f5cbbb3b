#include "doctest.h"

#include <random>
#include <sstream>

#include "cli.hpp"
#include "desert/serialize.hpp"
#include "desert/simulate.hpp"
#include "helpers.hpp"

using namespace desert;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "desert");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Writes a synthetic dataset from the simulation design.
fs::path synthetic_csv(const fs::path& dir, std::size_t n, std::uint64_t seed) {
    DgpConfig c;
    c.n = n;
    c.seed = seed;
    auto sim = gen_dataset(c);
    sim.data.schema = Schema{};
    write_csv(dir / "train.csv", sim.data);
    return dir / "train.csv";
}

// Units whose observed-decision probabilities are fixed per stratum.
fs::path stratum_csv(const fs::path& dir, const std::string& name, const PointwiseMu& mu) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::ofstream f(dir / name);
    f << "s,z,y,x\n";
    for (int i = 0; i < 3000; ++i) {
        const int s = u(rng) < 0.5, z = u(rng) < 0.5;
        f << s << ',' << z << ',' << (u(rng) < mu.at(s, z)) << ',' << u(rng) << '\n';
    }
    return dir / name;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("estimate is reproducible and predict applies the threshold policy") {
    const auto dir = testing::temp_dir("cli_estimate");
    const auto csv = synthetic_csv(dir, 1500, 3);
    const std::vector<std::string> args{"estimate", "--input", csv.string(), "--restarts", "2",
                                        "--interaction-order", "1", "--out-dir", (dir / "a").string()};
    const Run a = invoke(args);
    CHECK(a.code <= 1);
    for (const char* f : {"model.json", "implications.json", "units.csv", "alpha_hist.csv", "report.txt", "run.json"})
        CHECK(fs::exists(dir / "a" / f));
    auto again = args;
    again.back() = (dir / "b").string();
    again.push_back("--jobs");
    again.push_back("2");
    CHECK(invoke(again).code == a.code);
    CHECK(testing::read_text(dir / "a" / "model.json") == testing::read_text(dir / "b" / "model.json"));
    CHECK(testing::read_text(dir / "a" / "units.csv") == testing::read_text(dir / "b" / "units.csv"));

    const std::string model = (dir / "a" / "model.json").string();
    const auto decisions = [&](const std::string& sub) {
        std::ifstream in(dir / sub / "predictions.csv");
        std::string line;
        std::getline(in, line);
        int ones = 0, rows = 0;
        while (std::getline(in, line)) {
            ++rows;
            ones += line[line.find(',', line.find(',') + 1) + 1] == '1';
        }
        return std::pair<int, int>{ones, rows};
    };
    CHECK(invoke({"predict", "--model", model, "--input", csv.string(), "--threshold", "1.0", "--out-dir",
                  (dir / "p1").string()}).code == 0);
    CHECK(decisions("p1").first == 0);
    CHECK(invoke({"predict", "--model", model, "--input", csv.string(), "--threshold", "0.0", "--out-dir",
                  (dir / "p0").string()}).code == 0);
    CHECK(decisions("p0").first == 1500);
    CHECK(invoke({"predict", "--model", model, "--input", csv.string(), "--rate", "0.0805", "--out-dir",
                  (dir / "pr").string()}).code == 0);
    const auto [ones, rows] = decisions("pr");
    CHECK(ones >= 0.0805 * rows);
    CHECK(ones < 0.0805 * rows + 3);

    // New rows without s and y, one outside the training range.
    testing::write_text(dir / "new.csv", "z,x1,x2\n1,0.5,0.5\n0,1.7,0.2\n");
    const Run p = invoke({"predict", "--model", model, "--input", (dir / "new.csv").string(), "--rate", "0.5",
                          "--out-dir", (dir / "pn").string()});
    CHECK(p.code == 1);
    const std::string text = testing::read_text(dir / "pn" / "predictions.csv");
    CHECK(text.find(",1\n") != std::string::npos);

    SUBCASE("theta from the stored model") {
        CHECK(invoke({"theta", "--model", model, "--input", csv.string(), "--method", "plugin", "--out-dir",
                      (dir / "tp").string()}).code <= 1);
        CHECK(invoke({"theta", "--model", model, "--input", csv.string(), "--method", "onestep", "--out-dir",
                      (dir / "to").string()}).code <= 1);
        const Json plug = read_json((dir / "tp" / "theta.json").string());
        const Json one = read_json((dir / "to" / "theta.json").string());
        CHECK(plug["method"] == "plugin");
        CHECK(one["method"] == "onestep");
        CHECK(one["ci_low"].get<double>() <= one["point"].get<double>());
        CHECK(std::abs(one["point"].get<double>() - plug["point"].get<double>()) < 0.2);
    }
}

TEST_CASE("positivity failure exits with code 2") {
    const auto dir = testing::temp_dir("cli_positivity");
    testing::write_text(dir / "d.csv", "s,z,y,x\n0,0,1,0.1\n0,1,0,0.5\n1,0,1,0.9\n0,0,0,0.3\n");
    const Run r = invoke({"estimate", "--input", (dir / "d.csv").string(), "--out-dir", (dir / "o").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("s=1, z=1") != std::string::npos);
}

TEST_CASE("check exit codes follow the implication report") {
    const auto dir = testing::temp_dir("cli_check");
    const auto good = stratum_csv(dir, "good.csv", forward_mu({0.3, 0.6, 0.25, 0.15}));
    const Run a = invoke({"check", "--input", good.string(), "--out-dir", (dir / "g").string()});
    CHECK(a.code == 0);
    const auto bad = stratum_csv(dir, "bad.csv", PointwiseMu{0.5, 0.3, 0.55, 0.7});
    const Run b = invoke({"check", "--input", bad.string(), "--out-dir", (dir / "b").string()});
    CHECK(b.code == 1);
    const Json rep = read_json((dir / "b" / "implications.json").string());
    CHECK(rep["conditions"][2]["flagged"] == true);
}

TEST_CASE("config file supplies defaults that flags override") {
    const auto dir = testing::temp_dir("cli_config");
    testing::write_text(dir / "c.json", R"({"reps": 2, "n": 300, "seed": 5, "test_size": 2000, "restarts": 1,
                                           "methods": ["DSD", "FTU"]})");
    const Run r = invoke({"simulate", "--config", (dir / "c.json").string(), "--seed", "6", "--out-dir",
                          (dir / "o").string()});
    CHECK(r.code <= 1);
    const Json run = read_json((dir / "o" / "run.json").string());
    CHECK(run["seed"] == 6);
    CHECK(run["reps"] == 2);
    CHECK(run["n"] == 300);
    for (const char* f : {"summary.csv", "coverage.csv", "replications.csv", "figure.csv", "simulate.json"})
        CHECK(fs::exists(dir / "o" / f));
    CHECK(r.out.find("runtime") != std::string::npos);
    // Re-running the recorded configuration reproduces the primary outputs.
    const Run again = invoke({"simulate", "--config", (dir / "o" / "run.json").string(), "--out-dir",
                              (dir / "o2").string()});
    CHECK(again.code == r.code);
    CHECK(testing::read_text(dir / "o" / "summary.csv") == testing::read_text(dir / "o2" / "summary.csv"));
    CHECK(testing::read_text(dir / "o" / "replications.csv") == testing::read_text(dir / "o2" / "replications.csv"));
}

TEST_CASE("sensitivity sweep writes its table") {
    const auto dir = testing::temp_dir("cli_sweep");
    const auto csv = synthetic_csv(dir, 800, 4);
    const Run r = invoke({"sensitivity", "--input", csv.string(), "--variant", "delta", "--grid", "0:0,0.05:0.05",
                          "--boot", "0", "--restarts", "2", "--out-dir", (dir / "o").string()});
    CHECK(r.code <= 1);
    const std::string table = testing::read_text(dir / "o" / "sweep.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 3);
    CHECK(fs::exists(dir / "o" / "sweep.json"));
}

TEST_CASE("usage errors") {
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"estimate", "--no-such-flag"}).code == 2);
    CHECK(invoke({"estimate"}).code == 2);
    CHECK(invoke({"theta", "--input", "/nonexistent.csv"}).code == 2);
    CHECK(invoke({"--help"}).code == 0);
}

}
