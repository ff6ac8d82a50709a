#ifndef FUSETRACK_TRACKER_HPP
#define FUSETRACK_TRACKER_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "fusetrack/kalman.hpp"
#include "fusetrack/observations.hpp"

namespace fusetrack {

/// One observation claimed by a hypothesis, with the values cached at
/// association time that the selection energy needs later.
struct InlierRecord {
    int obs_index = -1;  // index within that frame's observation list
    Observation obs;
    double affinity = 1.0;  // 1.0 for the seed observation of a hypothesis
};

struct TrackHypothesis {
    std::int64_t id = 0;
    CoupledState state;
    int born = 0;
    int last_update = 0;
    int last_selected = 0;
    std::map<int, InlierRecord> inliers;          // frame -> claimed observation
    std::map<int, BBox2D> bbox_history;           // frame -> filtered 2D box
    Eigen::Vector3d category_dist = Eigen::Vector3d::Constant(1.0 / 3.0);
    std::vector<double> appearance;               // running normalized histogram
    bool extrapolating = false;
    int frames_extrapolating = 0;

    Category category() const;
};

struct TrackerConfig {
    double w_h_min = 0.3;   // minimal hypothesis score
    double tau = 0.1;       // inlier decay rate [1/frame]
    double w_c = 0.4;       // appearance weight in the affinity
    double gamma = 0.04;    // distance decay of the motion weight [1/m]
    double w_h_ol = 1.0;    // image-overlap interaction weight
    double w_h_sh = 2.0;    // shared-observation interaction weight
    double min_affinity = 0.1;

    // Branching: several observations this close to a hypothesis split it.
    double branch_center_px = 15.0;
    double branch_ground_m = 1.0;
    double branch_appearance = 0.7;

    int t_extrap = 10;  // frames a frustum-exited hypothesis keeps living
    int n_prune = 15;   // frames without selection before pruning
    int w_spawn = 3;    // temporal window for seeding new hypotheses
    int solver_branches = 8;

    double appearance_alpha = 0.1;  // running-average rate of the histogram
    /// confusion(k, c) = P(detected class c | true class k).
    Eigen::Matrix3d confusion = (Eigen::Matrix3d() << 0.90, 0.05, 0.05,
                                                      0.05, 0.90, 0.05,
                                                      0.05, 0.05, 0.90).finished();
};

struct TrackReportRow {
    std::int64_t id = 0;
    Category category = Category::kCar;
    BBox2D bbox;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d size3d = Eigen::Vector3d::Ones();
    double score = 0.0;  // negated hypothesis unary
};

struct TrackReport {
    std::map<int, std::vector<TrackReportRow>> frames;
};

/// Association affinity in [0, 1] between an observation and a hypothesis
/// whose state has been predicted to the current frame. Zero when the
/// detection class is incompatible with the hypothesis category (unless the
/// hypothesis is still immature, < 3 inliers). The appearance weight is
/// dropped when either side carries no histogram.
double affinity(const Observation& obs, const TrackHypothesis& hyp, const FrameContext& ctx,
                const TrackerConfig& cfg);

/// Selection unary: w_h_min minus the decayed sum of cached inlier
/// contributions (Eq.-style: exp(-tau dt) * s_det * affinity).
double hypothesis_unary(const TrackHypothesis& hyp, int current_frame, const TrackerConfig& cfg);

/// Selection interaction: squared-IoU overlap over the common lifetime plus a
/// penalty per shared observation.
double hypothesis_pairwise(const TrackHypothesis& a, const TrackHypothesis& b,
                           const TrackerConfig& cfg);

/// Online hypothesize-and-select tracker. Owns the over-complete hypothesis
/// set; one advance_frame call per frame, strictly in order.
class Tracker {
public:
    Tracker(const CouplingWeights& cw, const NoiseConfig& noise, const SizeStats& stats,
            const TrackerConfig& cfg, bool use_ground = true);

    /// Runs one tracking step and returns the selected, in-frustum
    /// hypotheses of this frame. Deterministic for identical inputs.
    std::vector<TrackReportRow> advance_frame(const std::vector<Observation>& observations,
                                              const FrameContext& ctx);

    const std::map<std::int64_t, TrackHypothesis>& hypotheses() const { return hyps_; }

private:
    struct StoredFrame {
        FrameContext ctx;
        std::vector<Observation> observations;
    };

    void predict_all(const FrameContext& ctx);
    void extend_and_branch(const std::vector<Observation>& observations, const FrameContext& ctx);
    void associate(TrackHypothesis& hyp, const Observation& obs, int obs_index,
                   double affinity_value, const FrameContext& ctx);
    void spawn_new(const FrameContext& ctx);
    void spawn_from(const StoredFrame& origin, int obs_index, const FrameContext& now);
    std::vector<std::int64_t> select(int frame);
    void prune(int frame);

    CouplingWeights cw_;
    NoiseConfig noise_;
    SizeStats stats_;
    TrackerConfig cfg_;
    bool use_ground_;

    std::map<std::int64_t, TrackHypothesis> hyps_;
    std::int64_t next_id_ = 1;
    std::deque<StoredFrame> recent_;
    std::set<std::pair<int, int>> anchored_;  // (frame, obs index) already seeding
    std::map<std::int64_t, std::pair<int, int>> seed_of_;
    bool has_prev_ = false;
    FrameContext prev_ctx_;
};

}  // namespace fusetrack

#endif
