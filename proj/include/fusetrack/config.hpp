#ifndef FUSETRACK_CONFIG_HPP
#define FUSETRACK_CONFIG_HPP

#include <string>

#include "fusetrack/kalman.hpp"
#include "fusetrack/observations.hpp"
#include "fusetrack/simulator.hpp"
#include "fusetrack/tracker.hpp"

namespace fusetrack {

/// Every tunable of the pipeline in one place. All values have engineering
/// defaults; a config file only needs the keys it wants to change.
struct PipelineConfig {
    FusionWeights fusion;
    CouplingWeights coupling;
    NoiseConfig noise;
    TrackerConfig tracker;
    SizeStats size_stats = SizeStats::defaults();
    double metrics_iou_threshold = 0.5;
    int solver_branches = 8;  // observation-fusion solver width
};

/// Throws InputError naming the offending field when an invariant is broken.
void validate(const PipelineConfig& cfg);

/// Parse a JSON config document. Unknown keys are rejected; missing keys keep
/// their defaults; the result is validated.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::string& path);

/// Parse a JSON scenario description for the simulator (documented in the
/// README). Unknown keys are rejected.
ScenarioSpec parse_scenario(const std::string& json_text);
ScenarioSpec load_scenario(const std::string& path);

}  // namespace fusetrack

#endif
