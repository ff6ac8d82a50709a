#ifndef FUSETRACK_IO_HPP
#define FUSETRACK_IO_HPP

#include <string>
#include <vector>

#include "fusetrack/frame.hpp"
#include "fusetrack/metrics.hpp"
#include "fusetrack/observations.hpp"
#include "fusetrack/tracker.hpp"

namespace fusetrack {

/// A parsed sequence directory: per-frame inputs plus the camera/ego context.
struct SequenceData {
    std::vector<FrameContext> contexts;
    std::vector<std::vector<Detection2D>> detections;  // indexed by frame
    std::vector<std::vector<Proposal3D>> proposals;    // indexed by frame
    bool has_proposals = false;
};

/// Read a sequence directory. Layout (documented in the README):
///   calib.txt       f u0 v0 width height
///   plane.txt       nx ny nz offset
///   poses.txt       world-to-camera 3x4 row-major, one line per frame
///   times.txt       timestamp in seconds, one line per frame
///   detections.txt  KITTI tracking label lines with id -1
///   proposals.txt   optional, versioned proposal lines
///   appearance.txt  optional per-detection appearance histograms
/// Malformed lines raise InputError naming the file and line number; a
/// missing proposals.txt simply yields the all-partial mode.
SequenceData read_sequence(const std::string& dir);

/// Ground-truth trajectories in KITTI label format (camera-frame positions
/// converted to world with the per-frame poses).
std::vector<GTTrajectory> read_gt(const std::string& path,
                                  const std::vector<FrameContext>& contexts);
void write_gt(const std::string& path, const std::vector<GTTrajectory>& gt,
              const std::vector<FrameContext>& contexts);

/// Tracking results in KITTI format: one line per reported object per frame,
/// ordered by (frame, id); positions written in that frame's camera
/// coordinates, rotation_y and alpha fixed to 0, score = the report score.
void write_results(const TrackReport& report, const std::vector<FrameContext>& contexts,
                   const std::string& path);
TrackReport read_results(const std::string& path, const std::vector<FrameContext>& contexts);

/// Writers used by the simulator to emit a complete sequence directory.
void write_contexts(const std::string& dir, const std::vector<FrameContext>& contexts);
void write_detections(const std::string& dir, const std::vector<std::vector<Detection2D>>& dets);
void write_proposals(const std::string& dir, const std::vector<std::vector<Proposal3D>>& props);

/// Fused-observation dump and per-frame fusion diagnostics (fuse subcommand).
void write_observations(const std::string& path,
                        const std::vector<std::vector<Observation>>& obs_per_frame);

}  // namespace fusetrack

#endif
