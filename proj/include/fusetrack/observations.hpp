#ifndef FUSETRACK_OBSERVATIONS_HPP
#define FUSETRACK_OBSERVATIONS_HPP

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fusetrack/frame.hpp"

namespace fusetrack {

enum class Category { kCar = 0, kPedestrian = 1, kCyclist = 2 };
inline constexpr int kNumCategories = 3;

const char* category_name(Category c);
std::optional<Category> category_from_name(const std::string& name);

/// Image-space detector response.
struct Detection2D {
    BBox2D bbox;
    Category category = Category::kCar;
    double score = 1.0;
    /// Normalized appearance histogram; empty when no descriptor is available.
    std::vector<double> appearance;
};

/// Class-agnostic 3D object proposal from a stereo point cloud.
struct Proposal3D {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();  // world, on the ground plane
    std::optional<Eigen::Vector3d> velocity;              // world, m/s; from scene flow
    Eigen::Vector3d size3d = Eigen::Vector3d::Ones();     // (w3D, h3D, l3D) meters
    double score = 1.0;
    std::vector<int> points;  // sorted ids of supporting 3D points
};

/// A detection with at most one associated proposal. `fused` iff the
/// proposal is present; otherwise this is a partial observation.
struct Observation {
    Detection2D detection;
    std::optional<Proposal3D> proposal;
    /// World position used by the tracker: the proposal position when fused,
    /// otherwise the footpoint back-projection (empty above the horizon).
    std::optional<Eigen::Vector3d> ground_position;

    bool fused() const { return proposal.has_value(); }
};

/// Per-category mean and variance of the 3D extent (w3D, h3D, l3D).
struct SizeStats {
    std::array<Eigen::Vector3d, kNumCategories> mean;
    std::array<Eigen::Vector3d, kNumCategories> variance;

    /// Engineering defaults: car (1.8, 1.6, 4.5), pedestrian (0.6, 1.75, 0.6),
    /// cyclist (0.6, 1.75, 1.8); sigma = 20% of the mean.
    static SizeStats defaults();

    const Eigen::Vector3d& mean_of(Category c) const { return mean[static_cast<int>(c)]; }
    const Eigen::Vector3d& var_of(Category c) const { return variance[static_cast<int>(c)]; }
};

/// Weights of the fusion energy plus the gating thresholds and the
/// ground-plane uncertainty model used for the Mahalanobis term.
struct FusionWeights {
    double w1 = 1.0;  // size prior term
    double w2 = 1.0;  // ground-plane distance term
    double w3 = 1.0;  // projected-overlap term
    double w4 = 0.5;  // minimal association requirement
    double w5 = 1.0;  // shared-point overlap penalty
    double w6 = 0.0;  // carried for config compatibility; exclusion is hard
    double gate_distance = 3.0;  // meters
    double gate_iou = 0.1;
    // Footpoint back-projection noise grows with depth like a stereo sensor:
    // sigma(z) = pos_sigma0 + pos_sigma_quad * z^2. Used by the Mahalanobis
    // distance (detection and proposal covariances are summed).
    double pos_sigma0 = 0.1;       // meters
    double pos_sigma_quad = 0.005;  // 1/meters
};

/// Ground-plane standard deviation of a footpoint back-projection at camera
/// depth z under the stereo-like error model above.
double ground_sigma(const FusionWeights& w, double depth);

/// Mahalanobis distance between a detection's footpoint back-projection and
/// a proposal position on the ground plane. Empty when the footpoint has no
/// ground intersection.
std::optional<double> ground_mahalanobis(const Detection2D& det, const Proposal3D& prop,
                                         const FrameContext& ctx, const FusionWeights& w);

/// Cheap geometric pre-filter: pairs whose ground distance and projected
/// overlap pass the gates.
std::vector<std::pair<int, int>> gate_pairs(const std::vector<Detection2D>& dets,
                                            const std::vector<Proposal3D>& props,
                                            const FrameContext& ctx, const FusionWeights& w);

/// Association potential of a gated (detection, proposal) pair:
/// -w1*phi_size - w2*phi_pos - w3*phi_proj + w4, all phi in [0, 1].
double fusion_unary(const Detection2D& det, const Proposal3D& prop, const SizeStats& stats,
                    const FrameContext& ctx, const FusionWeights& w);

/// Interaction of two gated pairs: w5-weighted normalized shared-point count,
/// plus a hard exclusion when the pairs share a detection or a proposal.
/// Arguments are (detection index, proposal) per pair.
std::pair<double, bool> fusion_pairwise(const std::pair<int, const Proposal3D*>& a,
                                        const std::pair<int, const Proposal3D*>& b,
                                        const FusionWeights& w);

/// Full per-frame early fusion: gate, build the energy graph, solve, emit one
/// fused observation per selected pair and a partial observation for every
/// detection left uncovered. Output observations follow detection order.
std::vector<Observation> fuse_frame(const std::vector<Detection2D>& dets,
                                    const std::vector<Proposal3D>& props,
                                    const SizeStats& stats, const FrameContext& ctx,
                                    const FusionWeights& w, int solver_branches = 8);

}  // namespace fusetrack

#endif
