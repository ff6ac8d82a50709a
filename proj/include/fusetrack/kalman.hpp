#ifndef FUSETRACK_KALMAN_HPP
#define FUSETRACK_KALMAN_HPP

#include <optional>

#include <Eigen/Core>

#include "fusetrack/frame.hpp"
#include "fusetrack/observations.hpp"

namespace fusetrack {

using Vec17 = Eigen::Matrix<double, 17, 1>;
using Mat17 = Eigen::Matrix<double, 17, 17>;

/// Joint 2D-3D filter state. Layout of the 17-vector:
///   [0..3]   2D box (x2D, y2D, w2D, h2D)            [px]
///   [4..7]   2D box rates (x., y., w., h.)           [px/s]
///   [8..10]  ground position (world)                 [m]
///   [11..13] velocity (world)                        [m/s]
///   [14..16] 3D extent (w3D, h3D, l3D)               [m]
struct CoupledState {
    Vec17 mean = Vec17::Zero();
    Mat17 covariance = Mat17::Identity();
    /// Set when a non-PSD covariance had to be clamped after an update.
    bool psd_clamped = false;

    BBox2D bbox() const { return {mean[0], mean[1], mean[2], mean[3]}; }
    Eigen::Vector3d position() const { return mean.segment<3>(8); }
    Eigen::Vector3d velocity() const { return mean.segment<3>(11); }
    Eigen::Vector3d size3d() const { return mean.segment<3>(14); }

    void set_bbox(const BBox2D& b) { mean[0] = b.x; mean[1] = b.y; mean[2] = b.w; mean[3] = b.h; }
};

/// Convex mixing coefficients of the 2D-3D coupling; w_a + w_b = 1 so that
/// w_b = 0 reduces the filter to an exact pair of decoupled constant-velocity
/// filters and w_b = 1 to full projective coupling.
struct CouplingWeights {
    double w_a = 0.7;
    double w_b = 0.3;

    static CouplingWeights decoupled() { return {1.0, 0.0}; }
};

/// Process/measurement noise configuration. All variances must be positive,
/// and the partial-observation position floor must dominate the fused one.
struct NoiseConfig {
    // Process noise spectral densities (white-acceleration models).
    double process_bbox = 16.0;  // px^2/s^3, all four box components
    double process_pos = 1.0;    // m^2/s^3, per ground axis
    double process_size = 0.01;  // m^2/s, random-walk 3D extent

    // Fused observations.
    double meas_bbox_var = 1.0;   // px^2
    double meas_pos_var = 0.09;   // m^2
    double meas_vel_var = 0.25;   // (m/s)^2
    double meas_size_var = 0.04;  // m^2

    // Partial observations: position from footpoint back-projection with a
    // depth-dependent standard deviation sigma0 + quad * z^2, size from the
    // category mean.
    double partial_pos_sigma0 = 0.5;  // m
    double partial_pos_quad = 0.005;  // 1/m
    double mean_size_var = 0.25;      // m^2

    // Initial covariance diagonal.
    double init_bbox_var = 4.0;
    double init_bbox_vel_var = 100.0;
    double init_pos_var = 1.0;
    double init_vel_var = 4.0;
    double init_size_var = 0.25;
};

/// State from a first observation. Fused observations copy box, position,
/// velocity (zero when no flow) and size. Partial observations back-project
/// the footpoint and take the category mean size; empty when the footpoint
/// has no ground intersection.
std::optional<CoupledState> init_state(const Observation& obs, const FrameContext& ctx,
                                       const SizeStats& stats, const NoiseConfig& noise);

/// Box-only initializer used by the pure-2D tracker variant: position is left
/// at the origin with a huge variance and never drives any decision.
CoupledState init_state_bbox_only(const Detection2D& det, const SizeStats& stats,
                                  const NoiseConfig& noise);

/// Deterministic part of the prediction: ego correction of the box footpoint,
/// constant-velocity propagation, and the projective coupling of the heights
/// and the footpoint. Empty when the state leaves the view frustum (depth in
/// either camera <= 0). Exposed separately so the Jacobian can be checked
/// against finite differences of exactly this map.
std::optional<Vec17> transition(const Vec17& x, double dt, const CameraIntrinsics& intr,
                                const EgoPose& ego_prev, const EgoPose& ego_curr,
                                const CouplingWeights& cw);

/// Analytic Jacobian of `transition` at `x`.
std::optional<Mat17> transition_jacobian(const Vec17& x, double dt, const CameraIntrinsics& intr,
                                         const EgoPose& ego_prev, const EgoPose& ego_curr,
                                         const CouplingWeights& cw);

/// Process noise for a time step of length dt.
Mat17 process_noise(double dt, const NoiseConfig& noise);

/// EKF prediction. Empty signals a frustum exit; the caller is expected to
/// switch the hypothesis to extrapolation. Throws std::invalid_argument when
/// dt <= 0.
std::optional<CoupledState> predict(const CoupledState& state, double dt,
                                    const CameraIntrinsics& intr, const EgoPose& ego_prev,
                                    const EgoPose& ego_curr, const CouplingWeights& cw,
                                    const NoiseConfig& noise);

/// Sequential scalar measurement update of a fused observation: box, position,
/// velocity (skipped when the proposal carries none) and size.
CoupledState update_fused(const CoupledState& state, const Observation& obs,
                          const NoiseConfig& noise);

/// Sequential scalar measurement update of a partial observation: box, then
/// back-projected footpoint with depth-inflated variance, then the category
/// mean size. Falls back to a box-only update above the horizon.
CoupledState update_partial(const CoupledState& state, const Observation& obs,
                            const FrameContext& ctx, const SizeStats& stats,
                            const NoiseConfig& noise);

/// Box-only measurement update (the pure-2D tracker path).
CoupledState update_bbox_only(const CoupledState& state, const Detection2D& det,
                              const NoiseConfig& noise);

}  // namespace fusetrack

#endif
