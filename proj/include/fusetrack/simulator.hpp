#ifndef FUSETRACK_SIMULATOR_HPP
#define FUSETRACK_SIMULATOR_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fusetrack/frame.hpp"
#include "fusetrack/metrics.hpp"
#include "fusetrack/observations.hpp"

namespace fusetrack {

/// Detector error model. Probabilities are clamped to [0, 1].
struct DetectionNoise {
    double bbox_center_sigma = 0.0;  // px
    double bbox_size_sigma = 0.0;    // px
    double miss_base = 0.0;          // miss probability at z = 0
    double miss_per_meter = 0.0;     // added miss probability per meter depth
    double fp_rate = 0.0;            // expected clutter detections per frame
    double class_confusion = 0.0;    // probability of a wrong class label
};

/// Stereo-like proposal error model: depth noise grows quadratically with
/// distance and availability fades linearly up to z_max.
struct ProposalNoise {
    double lateral_sigma = 0.0;   // m, orthogonal to the viewing direction
    double depth_quad = 0.005;    // k in sigma_z = k * z^2 [1/m]
    double size_frac_sigma = 0.0; // relative 3D size error
    double z_max = 30.0;          // availability horizon [m]
    int points_per_proposal = 20;
    double velocity_sigma = 0.3;  // m/s, scene-flow noise
};

/// One scripted object: constant velocity, or a turn when yaw_rate != 0.
struct SimObject {
    Category category = Category::kCar;
    Eigen::Vector2d position = Eigen::Vector2d::Zero();  // ground (x, z) at t = 0
    Eigen::Vector2d velocity = Eigen::Vector2d::Zero();  // (vx, vz) m/s
    double yaw_rate = 0.0;                               // rad/s
    Eigen::Vector3d size3d = Eigen::Vector3d(1.8, 1.6, 4.5);
    std::vector<double> appearance;  // empty -> generated from the seed
};

struct CameraSpec {
    double f = 700.0;
    double u0 = 620.0;
    double v0 = 190.0;
    double width = 1240.0;
    double height = 376.0;
    double height_above_ground = 1.6;  // m
};

struct EgoMotionSpec {
    enum class Kind { kStatic, kStraight, kCurve };
    Kind kind = Kind::kStatic;
    double speed = 0.0;     // m/s along the heading
    double yaw_rate = 0.0;  // rad/s, used by kCurve
};

struct ScenarioSpec {
    int duration = 100;   // frames
    double fps = 10.0;
    std::uint64_t seed = 1;
    CameraSpec camera;
    EgoMotionSpec ego;
    std::vector<SimObject> objects;
    DetectionNoise detection_noise;
    ProposalNoise proposal_noise;
    bool no_flow = false;  // drop scene-flow velocities from proposals
};

/// Deterministic appearance histogram of object `index` under `seed`.
std::vector<double> synth_appearance(std::uint64_t seed, int index, int dim = 8);

/// Ground-truth trajectories (ids = object indices) and per-frame contexts.
/// GT 2D boxes are the projected hulls of the upright 3D boxes; an object is
/// visible when its hull lies fully inside the image.
std::pair<std::vector<GTTrajectory>, std::vector<FrameContext>> generate(const ScenarioSpec& spec);

/// Noisy detections and proposals of one frame. Pure in (spec, gt, frame):
/// the generator is re-seeded per frame from (spec.seed, frame).
std::pair<std::vector<Detection2D>, std::vector<Proposal3D>> observe(
    const ScenarioSpec& spec, const std::vector<GTTrajectory>& gt, const FrameContext& ctx,
    int frame);

}  // namespace fusetrack

#endif
