#ifndef QS_PIPELINE_HPP
#define QS_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "qs/manifest.hpp"
#include "qs/run_config.hpp"

namespace qs::pipeline {

enum class Stage {
    Catalog,
    Synth,
    Select,
    Calibrate,
    SimulateSource,
    SimulateTarget,
    TrainSource,
    TrainTarget,
    Evaluate,
    Exceedance,
};

const char* stage_name(Stage stage);
Stage stage_from_name(const std::string& name);
// Stages in dependency order.
const std::vector<Stage>& all_stages();

// Runs one stage, verifying upstream artifacts through the manifest and
// recording outputs (config hash, seed, input/output hashes, wall time).
void run_stage(const RunConfig& cfg, Stage stage);

// Runs every stage in order up to and including `through` (default: all).
void run_pipeline(const RunConfig& cfg, std::optional<Stage> through = std::nullopt);

} // namespace qs::pipeline

#endif // QS_PIPELINE_HPP
