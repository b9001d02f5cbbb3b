#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "desert/data.hpp"
#include "desert/identify.hpp"

namespace testing {

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("desert_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Draws n units from the identification model with constant parameters and
// covariates uniform on [0,1]^d.
inline desert::Dataset constant_model_data(std::size_t n, const desert::PointwiseParams& p,
                                           std::uint64_t seed, std::size_t d = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<desert::ObservationRecord> recs(n);
    for (auto& r : recs) {
        for (std::size_t j = 0; j < d; ++j) r.x.push_back(u(rng));
        r.s = u(rng) < 0.5;
        r.z = u(rng) < 0.5;
        const double mu = desert::forward_mu(p).at(r.s, r.z);
        r.y = u(rng) < mu;
    }
    std::vector<std::string> names;
    for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
    return desert::Dataset(std::move(recs), names, desert::Scaling::identity(d), true);
}

}  // namespace testing
