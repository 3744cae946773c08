#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcsgm/chain.hpp"
#include "mcsgm/losses.hpp"
#include "mcsgm/optim.hpp"
#include "mcsgm/risk_stability.hpp"
#include "mcsgm/theory_bounds.hpp"

namespace mcsgm::harness {

inline constexpr const char* kToolVersion = "mcsgm 0.1.0";

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// OLS on (log T, log value); requires >= 2 distinct T and positive values.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

// Empirical (1-gamma)-quantile with linear interpolation between order
// statistics; gamma -> 1 gives the minimum.
double quantile_report(std::vector<double> values, double gamma);

// FNV-1a over the canonical config dump; pins outputs to their inputs.
std::uint64_t config_hash(const nlohmann::json& j);

struct ExperimentConfig {
  std::string kind;  // chain-info | sgd-rate | sgd-stability | sgd-gen | sgda-rate
                     // | sgda-risk | nonconvex-gradnorm | hp-quantiles | bounds
  nlohmann::json raw;
  std::uint64_t master_seed = 1;
  std::size_t replicates = 1;
  std::size_t threads = 1;
  std::string out_dir = "out";
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Simple results table; every cell preformatted.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct RunOutput {
  Table results;
  nlohmann::json summary;  // fit slopes, bounds, pass-through values
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> curves;
};

// Executes the configured experiment; deterministic for a fixed config.
RunOutput run_experiment(const ExperimentConfig& cfg);

// Writes results.csv (leading comment line with tool version + config hash),
// manifest.txt (key = value echo of the resolved config and seeds) and
// plot_<name>.dat two-column files; returns the results path.
std::string write_outputs(const ExperimentConfig& cfg, const RunOutput& out);

std::string format_double(double v);

}  // namespace mcsgm::harness
