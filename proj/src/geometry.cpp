#include "fusetrack/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace fusetrack {

Eigen::Vector3d GroundPlane::up_toward(const EgoPose& ego) const {
    const double side = normal.dot(ego.center()) - offset;
    return side >= 0.0 ? normal : Eigen::Vector3d(-normal);
}

std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& point_camera,
                                       const CameraIntrinsics& intr) {
    const double z = point_camera.z();
    if (z <= 0.0) return std::nullopt;
    return Eigen::Vector2d(intr.f * point_camera.x() / z + intr.u0,
                           intr.f * point_camera.y() / z + intr.v0);
}

Eigen::Vector3d pixel_ray(const Eigen::Vector2d& pixel, const CameraIntrinsics& intr) {
    return {(pixel.x() - intr.u0) / intr.f, (pixel.y() - intr.v0) / intr.f, 1.0};
}

std::optional<Eigen::Vector3d> backproject_to_ground(const Eigen::Vector2d& pixel,
                                                     const CameraIntrinsics& intr,
                                                     const EgoPose& ego,
                                                     const GroundPlane& plane) {
    const Eigen::Vector3d origin = ego.center();
    const Eigen::Vector3d dir = ego.rotation.transpose() * pixel_ray(pixel, intr);
    const double denom = plane.normal.dot(dir);
    if (std::abs(denom) < kRayPlaneTol) return std::nullopt;
    const double s = (plane.offset - plane.normal.dot(origin)) / denom;
    // The ray direction has unit camera depth, so s equals the camera-frame z.
    if (!(s > 0.0)) return std::nullopt;
    return Eigen::Vector3d(origin + s * dir);
}

std::optional<BBox2D> ego_correct_bbox(const BBox2D& bbox, double depth_estimate,
                                       const CameraIntrinsics& intr,
                                       const EgoPose& ego_prev, const EgoPose& ego_curr) {
    // Identity motion is the exact identity map, not a project/backproject
    // round trip through floating point.
    if (ego_prev.rotation == ego_curr.rotation && ego_prev.translation == ego_curr.translation) {
        return bbox;
    }
    const Eigen::Vector3d fp_cam_prev = depth_estimate * pixel_ray(bbox.footpoint(), intr);
    const Eigen::Vector3d fp_world = ego_prev.to_world(fp_cam_prev);
    const Eigen::Vector3d fp_cam_curr = ego_curr.to_camera(fp_world);
    const auto fp_new = project(fp_cam_curr, intr);
    if (!fp_new) return std::nullopt;
    BBox2D out = bbox;
    out.x = fp_new->x();
    out.y = fp_new->y() - 0.5 * bbox.h;
    return out;
}

double iou_2d(const BBox2D& a, const BBox2D& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.w * a.h + b.w * b.h - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

std::optional<BBox2D> project_box_hull(const Eigen::Vector3d& base_world,
                                       const Eigen::Vector3d& size_whl,
                                       const Eigen::Vector3d& up,
                                       const CameraIntrinsics& intr,
                                       const EgoPose& ego) {
    const double hw = 0.5 * size_whl.x();
    const double hl = 0.5 * size_whl.z();
    const Eigen::Vector3d ex(1.0, 0.0, 0.0);
    const Eigen::Vector3d ez(0.0, 0.0, 1.0);

    double umin = 0.0, umax = 0.0, vmin = 0.0, vmax = 0.0;
    bool first = true;
    for (int ix : {-1, 1}) {
        for (int iz : {-1, 1}) {
            for (int iy : {0, 1}) {
                const Eigen::Vector3d corner =
                    base_world + ix * hw * ex + iz * hl * ez + iy * size_whl.y() * up;
                const auto px = project(ego.to_camera(corner), intr);
                if (!px) return std::nullopt;
                if (first) {
                    umin = umax = px->x();
                    vmin = vmax = px->y();
                    first = false;
                } else {
                    umin = std::min(umin, px->x());
                    umax = std::max(umax, px->x());
                    vmin = std::min(vmin, px->y());
                    vmax = std::max(vmax, px->y());
                }
            }
        }
    }
    return BBox2D::from_corners(umin, vmin, umax, vmax);
}

}  // namespace fusetrack
