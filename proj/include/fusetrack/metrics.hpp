#ifndef FUSETRACK_METRICS_HPP
#define FUSETRACK_METRICS_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fusetrack/frame.hpp"
#include "fusetrack/observations.hpp"
#include "fusetrack/tracker.hpp"

namespace fusetrack {

struct GTFrameEntry {
    BBox2D bbox;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();  // world, on the ground plane
    Eigen::Vector3d size3d = Eigen::Vector3d::Ones();    // (w3D, h3D, l3D)
    Category category = Category::kCar;
    bool visible = true;
};

struct GTTrajectory {
    int id = 0;
    std::map<int, GTFrameEntry> frames;
};

struct RangeBreakdown {
    double lo = 0.0;
    double hi = 0.0;
    double motp2d = 0.0;
    double motp3d = 0.0;
    long tp = 0;
};

/// CLEAR-MOT summary. motp2d is mean IoU of true positives (higher better),
/// motp3d mean ground-plane distance in meters (lower better).
struct MotReport {
    double mota = 1.0;
    double motp2d = 1.0;
    double motp3d = 0.0;
    long id_switches = 0;
    long fragmentations = 0;
    long mostly_tracked = 0;
    long partly_tracked = 0;
    long mostly_lost = 0;
    long tp = 0;
    long fp = 0;
    long fn = 0;
    std::vector<RangeBreakdown> by_range;
};

/// Default camera-distance bins of the by-range breakdown, in meters.
std::vector<std::pair<double, double>> default_ranges();

/// Minimum-cost assignment on a square cost matrix (Hungarian algorithm);
/// returns the assigned column of each row.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

/// Per-frame GT-to-track matching: carried-over pairs are kept first when
/// they still clear the IoU threshold, the rest is resolved by a
/// maximum-total-IoU assignment. Returns (gt index, track index) pairs.
std::vector<std::pair<int, int>> match_frame(const std::vector<BBox2D>& gt_boxes,
                                             const std::vector<BBox2D>& track_boxes,
                                             double iou_threshold,
                                             const std::vector<std::pair<int, int>>& carried = {});

/// Full CLEAR-MOT evaluation in image and world space. `contexts` supplies
/// the camera centers used for the by-distance breakdown; frames missing a
/// context fall back to the world origin.
MotReport evaluate(const std::vector<GTTrajectory>& gt, const TrackReport& report,
                   const std::vector<FrameContext>& contexts, double iou_threshold,
                   const std::vector<std::pair<double, double>>& ranges = default_ranges());

/// Flat CSV with the exact column pair metric,value.
void write_summary_csv(const MotReport& report, const std::string& path);
/// Per-range MOTP values: range_lo,range_hi,motp2d,motp3d,tp.
void write_range_csv(const MotReport& report, const std::string& path);

}  // namespace fusetrack

#endif
