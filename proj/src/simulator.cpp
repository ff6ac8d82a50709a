#include "fusetrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fusetrack {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Eigen::Matrix3d yaw_rotation(double psi) {
    Eigen::Matrix3d r;
    r << std::cos(psi), 0.0, std::sin(psi),
         0.0, 1.0, 0.0,
         -std::sin(psi), 0.0, std::cos(psi);
    return r;
}

EgoPose pose_from(const Eigen::Vector3d& center_world, double yaw) {
    EgoPose pose;
    pose.rotation = yaw_rotation(yaw).transpose();
    pose.translation = -(pose.rotation * center_world);
    return pose;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::vector<double> synth_appearance(std::uint64_t seed, int index, int dim) {
    std::mt19937_64 rng(splitmix64(seed ^ (0xA99AECull + static_cast<std::uint64_t>(index) * 7919ull)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(dim));
    double sum = 0.0;
    for (double& x : v) {
        x = std::abs(gauss(rng)) + 1e-3;
        sum += x;
    }
    for (double& x : v) x /= sum;
    return v;
}

std::pair<std::vector<GTTrajectory>, std::vector<FrameContext>> generate(const ScenarioSpec& spec) {
    const double dt = 1.0 / spec.fps;
    const double h_cam = spec.camera.height_above_ground;

    CameraIntrinsics intr;
    intr.f = spec.camera.f;
    intr.u0 = spec.camera.u0;
    intr.v0 = spec.camera.v0;
    intr.image_width = spec.camera.width;
    intr.image_height = spec.camera.height;

    GroundPlane plane;
    plane.normal = Eigen::Vector3d(0.0, -1.0, 0.0);
    plane.offset = -h_cam;

    // Ego path on the plane; world frame anchored at the first camera pose.
    std::vector<FrameContext> contexts(static_cast<std::size_t>(spec.duration));
    Eigen::Vector3d ego_pos = Eigen::Vector3d::Zero();
    double ego_yaw = 0.0;
    for (int k = 0; k < spec.duration; ++k) {
        FrameContext& ctx = contexts[static_cast<std::size_t>(k)];
        ctx.frame = k;
        ctx.timestamp = k * dt;
        ctx.intrinsics = intr;
        ctx.plane = plane;
        ctx.ego = pose_from(ego_pos, ego_yaw);
        switch (spec.ego.kind) {
            case EgoMotionSpec::Kind::kStatic:
                break;
            case EgoMotionSpec::Kind::kStraight:
                ego_pos.z() += dt * spec.ego.speed;
                break;
            case EgoMotionSpec::Kind::kCurve: {
                const Eigen::Vector3d forward(std::sin(ego_yaw), 0.0, std::cos(ego_yaw));
                ego_pos += dt * spec.ego.speed * forward;
                ego_yaw += dt * spec.ego.yaw_rate;
                break;
            }
        }
    }

    std::vector<GTTrajectory> gt(spec.objects.size());
    const Eigen::Vector3d up(0.0, -1.0, 0.0);
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        const SimObject& obj = spec.objects[i];
        gt[i].id = static_cast<int>(i);

        Eigen::Vector3d pos3(obj.position.x(), h_cam, obj.position.y());
        Eigen::Vector3d vel3(obj.velocity.x(), 0.0, obj.velocity.y());
        for (int k = 0; k < spec.duration; ++k) {
            const FrameContext& ctx = contexts[static_cast<std::size_t>(k)];
            GTFrameEntry entry;
            entry.category = obj.category;
            entry.position = pos3;
            entry.size3d = obj.size3d;

            entry.visible = false;
            if (const auto hull = project_box_hull(pos3, obj.size3d, up, intr, ctx.ego)) {
                entry.bbox = *hull;
                entry.visible = hull->left() >= 0.0 && hull->right() <= intr.image_width &&
                                hull->top() >= 0.0 && hull->bottom() <= intr.image_height;
            }
            gt[i].frames[k] = entry;

            if (obj.yaw_rate == 0.0) {
                // Exact line for the constant-velocity profile.
                pos3 = Eigen::Vector3d(obj.position.x(), h_cam, obj.position.y()) +
                       (k + 1) * dt * Eigen::Vector3d(obj.velocity.x(), 0.0, obj.velocity.y());
            } else {
                pos3 += dt * vel3;
                vel3 = yaw_rotation(obj.yaw_rate * dt) * vel3;
            }
        }
    }
    return {std::move(gt), std::move(contexts)};
}

std::pair<std::vector<Detection2D>, std::vector<Proposal3D>> observe(
    const ScenarioSpec& spec, const std::vector<GTTrajectory>& gt, const FrameContext& ctx,
    int frame) {
    std::mt19937_64 rng(splitmix64(spec.seed * 0x51ED270B9ull + static_cast<std::uint64_t>(frame)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const DetectionNoise& dn = spec.detection_noise;
    const ProposalNoise& pn = spec.proposal_noise;
    const Eigen::Vector3d cam = ctx.ego.center();
    const Eigen::Vector3d up = ctx.plane.up_toward(ctx.ego);

    std::vector<Detection2D> dets;
    std::vector<Proposal3D> props;

    for (std::size_t i = 0; i < gt.size(); ++i) {
        const auto it = gt[i].frames.find(frame);
        if (it == gt[i].frames.end() || !it->second.visible) continue;
        const GTFrameEntry& entry = it->second;
        const SimObject& obj = spec.objects[i];
        const double depth = ctx.ego.to_camera(entry.position).z();

        const double p_miss = clamp01(dn.miss_base + dn.miss_per_meter * depth);
        if (uni(rng) >= p_miss) {
            Detection2D det;
            det.bbox = entry.bbox;
            det.bbox.x += dn.bbox_center_sigma * gauss(rng);
            det.bbox.y += dn.bbox_center_sigma * gauss(rng);
            det.bbox.w = std::max(2.0, det.bbox.w + dn.bbox_size_sigma * gauss(rng));
            det.bbox.h = std::max(2.0, det.bbox.h + dn.bbox_size_sigma * gauss(rng));
            det.category = entry.category;
            if (dn.class_confusion > 0.0 && uni(rng) < dn.class_confusion) {
                const int shift = 1 + static_cast<int>(uni(rng) * 2.0);
                det.category = static_cast<Category>((static_cast<int>(entry.category) + shift) % kNumCategories);
            }
            det.score = dn.bbox_center_sigma > 0.0 ? std::clamp(1.0 - std::abs(0.05 * gauss(rng)), 0.5, 1.0) : 1.0;
            // Fixed per-object histogram with additive sigma = 0.02, renormalized.
            det.appearance = obj.appearance.empty() ? synth_appearance(spec.seed, static_cast<int>(i)) : obj.appearance;
            double sum = 0.0;
            for (double& v : det.appearance) {
                v = std::max(1e-6, v + 0.02 * gauss(rng));
                sum += v;
            }
            for (double& v : det.appearance) v /= sum;
            dets.push_back(std::move(det));
        }

        const double p_avail = clamp01(1.0 - depth / pn.z_max);
        if (uni(rng) < p_avail) {
            Proposal3D prop;
            // Viewing direction in the plane, and its in-plane lateral.
            Eigen::Vector3d look = entry.position - cam;
            look -= up * up.dot(look);
            if (look.norm() < 1e-12) look = Eigen::Vector3d(0, 0, 1) - up * up.dot(Eigen::Vector3d(0, 0, 1));
            look.normalize();
            const Eigen::Vector3d lateral = up.cross(look);

            const double sigma_z = pn.depth_quad * depth * depth;
            prop.position = entry.position + sigma_z * gauss(rng) * look +
                            pn.lateral_sigma * gauss(rng) * lateral;
            if (!spec.no_flow) {
                // Scene flow needs a successor frame to difference against.
                const auto next = gt[i].frames.find(frame + 1);
                if (next != gt[i].frames.end()) {
                    Eigen::Vector3d v = (next->second.position - entry.position) * spec.fps;
                    v += pn.velocity_sigma * gauss(rng) * look +
                         pn.velocity_sigma * gauss(rng) * lateral;
                    prop.velocity = v;
                }
            }
            prop.size3d = obj.size3d;
            for (int d = 0; d < 3; ++d) {
                prop.size3d[d] = std::max(0.05, prop.size3d[d] * (1.0 + pn.size_frac_sigma * gauss(rng)));
            }
            prop.score = 1.0;
            prop.points.resize(static_cast<std::size_t>(pn.points_per_proposal));
            for (int m = 0; m < pn.points_per_proposal; ++m) {
                prop.points[static_cast<std::size_t>(m)] =
                    static_cast<int>(i) * pn.points_per_proposal + m;
            }
            props.push_back(std::move(prop));
        }
    }

    // Clutter detections, uniform over the image.
    if (dn.fp_rate > 0.0) {
        std::poisson_distribution<int> poisson(dn.fp_rate);
        const int n_fp = poisson(rng);
        for (int q = 0; q < n_fp; ++q) {
            Detection2D det;
            det.bbox.w = 20.0 + 60.0 * uni(rng);
            det.bbox.h = 30.0 + 90.0 * uni(rng);
            det.bbox.x = uni(rng) * ctx.intrinsics.image_width;
            det.bbox.y = uni(rng) * ctx.intrinsics.image_height;
            det.category = static_cast<Category>(static_cast<int>(uni(rng) * kNumCategories) % kNumCategories);
            det.score = 0.5 + 0.4 * uni(rng);
            det.appearance = synth_appearance(spec.seed ^ 0xF00Dull, 1000 + q);
            dets.push_back(std::move(det));
        }
    }

    return {std::move(dets), std::move(props)};
}

}  // namespace fusetrack
