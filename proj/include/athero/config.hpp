#pragma once

// Run configuration: sectioned key = value files, command-line overrides and
// the JSON echo written into run manifests.

#include "athero/model.hpp"
#include "athero/verify.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace athero::cli {

enum class Method { Direct, Indirect, Both };

struct RunConfig {
  model::ModelParameters params;
  int N = 8;
  int M = 8;
  int Ne = 16;  // convergence reference grid
  int Me = 16;
  Method method = Method::Both;
  std::string out = "athero-out";
  verify::SolverOptions solver;
  std::vector<verify::GridSpec> convergence_grids{{2, 2}, {4, 4}, {8, 8}};
  std::vector<std::pair<double, double>> sweep_pairs = verify::default_sweep_pairs();
  int sweep_samples = 101;
  bool sweep_concurrent = false;

  /// Throws InvalidInput naming the violated invariant.
  void validate() const;
};

/// One configurable key; `section.name` is also the command-line flag.
struct ConfigKey {
  std::string section;
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;

  std::string dotted() const { return section + "." + name; }
};

const std::vector<ConfigKey>& config_keys();

/// Parses a config file on top of the defaults and validates the result.
/// Errors carry "path:line:" when the offending line is known.
RunConfig load_config(const std::string& path);

/// Applies text (file syntax) on top of cfg without validating.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);

/// Sets one `section.key` value; throws InvalidInput for unknown keys or
/// unparsable values.
void apply_override(RunConfig& cfg, const std::string& dotted, const std::string& value);

/// Every key with its resolved value, grouped by section.
nlohmann::json to_json(const RunConfig& cfg);

std::string method_name(Method m);

}  // namespace athero::cli
