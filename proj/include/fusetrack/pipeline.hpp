#ifndef FUSETRACK_PIPELINE_HPP
#define FUSETRACK_PIPELINE_HPP

#include <vector>

#include "fusetrack/config.hpp"
#include "fusetrack/io.hpp"
#include "fusetrack/tracker.hpp"

namespace fusetrack {

/// Ablation switches of the track pipeline.
struct TrackOptions {
    bool no_flow = false;          // strip scene-flow velocities from proposals
    bool detections_only = false;  // drop 3D proposals entirely
    bool coupling_on = true;       // false forces w_b = 0
    bool two_d_only = false;       // pure 2D: no proposals, no ground, no ego
};

struct PipelineResult {
    TrackReport report;
    std::vector<std::vector<Observation>> observations;  // per frame, post-fusion
    std::vector<double> frame_ms;                        // fuse + track wall time
    long fused_count = 0;
    long partial_count = 0;
};

/// Run observation fusion and tracking over a whole sequence, frames strictly
/// in order.
PipelineResult run_tracking(const SequenceData& seq, const PipelineConfig& cfg,
                            const TrackOptions& opt = {});

}  // namespace fusetrack

#endif
