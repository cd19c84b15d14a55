#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "atme/dataset.hpp"
#include "atme/sensitivity.hpp"
#include "atme/simulation.hpp"

namespace atme::cli {

inline constexpr const char* kToolVersion = "atme 0.1.0";

/// %.17g rendering; round-trips doubles exactly.
std::string format_double(double v);

nlohmann::json to_json(const EstimateResult& r, std::uint64_t seed);
nlohmann::json to_json(const SupportReport& r);
nlohmann::json to_json(const MonteCarloReport& r);
nlohmann::json to_json(const SensitivityGrid& g, double delta_hat);
nlohmann::json to_json(const LevelCurve& c);
nlohmann::json to_json(const DgpConfig& cfg);

std::string to_csv(const EstimateResult& r);
std::string to_csv(const MonteCarloReport& r);
/// Columns: alpha_tilde,kappa_diff,delta_adjusted,converged,residual
std::string to_csv(const SensitivityGrid& g, double delta_hat);
std::string to_csv(const LevelCurve& c);

/// Parses "normal", "uniform:lo,hi", or "discrete:v:p,v:p,...".
XModel parse_x_model(const std::string& text);
std::string x_model_to_string(const XModel& m);

void write_text_file(const std::string& path, const std::string& body);

}  // namespace atme::cli
