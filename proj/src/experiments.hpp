#pragma once

#include <json.hpp>
#include <string>

namespace icl {

// Normalizes a run configuration, filling defaults and rejecting unknown
// experiments or out-of-range values.
nlohmann::json validate_config(const nlohmann::json& config);

struct ExperimentOutcome {
  nlohmann::json summary;
  bool check_failed = false;
};

// Executes the named experiment, writing artifacts under config["out"] when it
// is a nonempty path. Emitted files depend only on the config contents.
ExperimentOutcome run_experiment_config(const nlohmann::json& config);

}  // namespace icl
