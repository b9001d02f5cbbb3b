#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "desert/basis.hpp"
#include "desert/data.hpp"
#include "desert/identify.hpp"
#include "desert/regress.hpp"
#include "desert/sensitivity.hpp"
#include "desert/sievemle.hpp"
#include "desert/simulate.hpp"
#include "desert/theta.hpp"

namespace desert {

using Json = nlohmann::ordered_json;

// A fitted model as stored on disk.
struct FittedModel {
    std::vector<std::string> covariate_names;
    Scaling scaling;
    Schema schema;
    NuisanceEstimates estimates;
    std::optional<PropensityModel> propensity;
};

Json to_json(const BasisConfig& c);
BasisConfig basis_config_from_json(const Json& j);

Json to_json(const SensitivityFunction& f);
SensitivityFunction sensitivity_function_from_json(const Json& j);
Json to_json(const SensitivityParams& p);
SensitivityParams sensitivity_params_from_json(const Json& j);

Json to_json(const FitDiagnostics& d);
Json to_json(const ThetaEstimate& t);
Json to_json(const ImplicationReport& r);
Json to_json(const FittedModel& m);
FittedModel fitted_model_from_json(const Json& j);

Json sweep_metadata(const SweepTable& t);
Json monte_carlo_metadata(const MonteCarloSummary& s);

Json read_json(const std::string& path);
// Writes with two-space indentation and a trailing newline.
void write_json(const std::string& path, const Json& j);

}  // namespace desert
