#ifndef FUSETRACK_GEOMETRY_HPP
#define FUSETRACK_GEOMETRY_HPP

#include <optional>

#include <Eigen/Core>

namespace fusetrack {

/// Pinhole camera with square pixels. Convention: X right, Y down, Z forward.
struct CameraIntrinsics {
    double f = 1.0;        // focal length [px]
    double u0 = 0.0;       // principal point, horizontal [px]
    double v0 = 0.0;       // principal point, vertical [px]
    double image_width = 0.0;
    double image_height = 0.0;
};

/// Rigid transform from the world frame to the camera frame:
/// x_cam = rotation * x_world + translation.
/// The world frame is fixed at the first camera pose of a sequence.
struct EgoPose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
        return rotation * p_world + translation;
    }
    Eigen::Vector3d to_world(const Eigen::Vector3d& p_camera) const {
        return rotation.transpose() * (p_camera - translation);
    }
    /// Camera center expressed in world coordinates.
    Eigen::Vector3d center() const { return -(rotation.transpose() * translation); }

    bool is_identity() const {
        return rotation == Eigen::Matrix3d::Identity() && translation == Eigen::Vector3d::Zero();
    }
};

/// Plane {x : normal . x = offset} in world coordinates, ||normal|| = 1.
struct GroundPlane {
    Eigen::Vector3d normal = Eigen::Vector3d(0.0, -1.0, 0.0);
    double offset = 0.0;

    /// Unit normal oriented toward the camera side of the plane.
    Eigen::Vector3d up_toward(const EgoPose& ego) const;
};

/// Axis-aligned 2D box stored as center + extent, in pixels.
struct BBox2D {
    double x = 0.0;  // center u
    double y = 0.0;  // center v
    double w = 0.0;
    double h = 0.0;

    double left() const { return x - 0.5 * w; }
    double right() const { return x + 0.5 * w; }
    double top() const { return y - 0.5 * h; }
    double bottom() const { return y + 0.5 * h; }
    /// Bottom-center pixel, assumed to touch the ground.
    Eigen::Vector2d footpoint() const { return {x, y + 0.5 * h}; }

    static BBox2D from_corners(double l, double t, double r, double b) {
        return {0.5 * (l + r), 0.5 * (t + b), r - l, b - t};
    }
};

// Rays closer to parallel than this are treated as missing the plane.
inline constexpr double kRayPlaneTol = 1e-9;

/// Pinhole projection of a camera-frame point. Empty if the point is not
/// strictly in front of the camera.
std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& point_camera,
                                       const CameraIntrinsics& intr);

/// Unit-depth viewing ray of a pixel, in camera coordinates (z = 1).
Eigen::Vector3d pixel_ray(const Eigen::Vector2d& pixel, const CameraIntrinsics& intr);

/// Intersect the viewing ray of `pixel` with the ground plane; world point.
/// Empty when the ray is parallel to the plane or hits it behind the camera.
std::optional<Eigen::Vector3d> backproject_to_ground(const Eigen::Vector2d& pixel,
                                                     const CameraIntrinsics& intr,
                                                     const EgoPose& ego,
                                                     const GroundPlane& plane);

/// Shift a bounding box so that its footpoint follows the ego motion between
/// two poses, assuming the footpoint sits at `depth_estimate` in front of the
/// previous camera. Width and height are preserved. Empty when the corrected
/// footpoint falls behind the current camera (box left the frustum).
std::optional<BBox2D> ego_correct_bbox(const BBox2D& bbox, double depth_estimate,
                                       const CameraIntrinsics& intr,
                                       const EgoPose& ego_prev, const EgoPose& ego_curr);

/// Intersection-over-union of two boxes, in [0, 1].
double iou_2d(const BBox2D& a, const BBox2D& b);

/// Axis-aligned hull of the projected corners of an upright 3D box whose
/// bottom face is centered at `base_world` (a ground-plane point), with
/// extent size = (w, h, l): w along world X, l along world Z, h along `up`.
/// Empty if any corner is behind the camera.
std::optional<BBox2D> project_box_hull(const Eigen::Vector3d& base_world,
                                       const Eigen::Vector3d& size_whl,
                                       const Eigen::Vector3d& up,
                                       const CameraIntrinsics& intr,
                                       const EgoPose& ego);

}  // namespace fusetrack

#endif
