#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace desert::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kWarnings = 1;
inline constexpr int kError = 2;
inline constexpr int kInternalError = 3;

// Settings shared by all subcommands. Values come from --config (JSON),
// then command-line flags.
struct RunConfig {
    std::string command;
    std::string input;
    std::string schema;
    std::string model;
    std::string out_dir = "out";

    std::string basis_family = "polynomial";
    int basis_degree = 3;
    int interaction_order = -1;  // -1: default for the covariate dimension
    int knots = 2;

    std::string variant = "baseline";
    std::vector<double> kappa;
    std::vector<double> delta;
    std::vector<double> zeta;
    std::string grid;  // "a:b,c:d" pairs for sweeps

    std::string method = "onestep";
    double level = 0.95;
    int boot = 200;
    int crossfit = 0;

    std::optional<double> rate;
    std::optional<double> threshold;

    int reps = 100;
    std::size_t n = 2000;
    double dgp_delta = 0.0;
    std::size_t test_size = 100000;
    std::vector<std::string> methods{"DSD", "UML", "FTU", "MLC", "LD"};

    int restarts = 10;
    double floor = 0.001;
    double check_tol = 0.01;
    double check_threshold = 0.05;
    int jobs = 1;
    std::uint64_t seed = 20240601;
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace desert::cli
