#include "fusetrack/observations.hpp"

#include <algorithm>
#include <cmath>

#include "fusetrack/crf.hpp"

namespace fusetrack {

const char* category_name(Category c) {
    switch (c) {
        case Category::kCar: return "Car";
        case Category::kPedestrian: return "Pedestrian";
        case Category::kCyclist: return "Cyclist";
    }
    return "Car";
}

std::optional<Category> category_from_name(const std::string& name) {
    if (name == "Car" || name == "car") return Category::kCar;
    if (name == "Pedestrian" || name == "pedestrian") return Category::kPedestrian;
    if (name == "Cyclist" || name == "cyclist") return Category::kCyclist;
    return std::nullopt;
}

SizeStats SizeStats::defaults() {
    SizeStats s;
    s.mean[0] = {1.8, 1.6, 4.5};
    s.mean[1] = {0.6, 1.75, 0.6};
    s.mean[2] = {0.6, 1.75, 1.8};
    for (int c = 0; c < kNumCategories; ++c) {
        const Eigen::Vector3d sigma = 0.2 * s.mean[c];
        s.variance[c] = sigma.cwiseProduct(sigma);
    }
    return s;
}

double ground_sigma(const FusionWeights& w, double depth) {
    return w.pos_sigma0 + w.pos_sigma_quad * depth * depth;
}

namespace {

// Footpoint back-projection plus the camera depths needed for the noise model.
struct DetGround {
    std::optional<Eigen::Vector3d> position;
    double depth = 0.0;  // camera depth of the back-projected footpoint
};

DetGround det_ground_point(const Detection2D& det, const FrameContext& ctx) {
    DetGround out;
    out.position = backproject_to_ground(det.bbox.footpoint(), ctx.intrinsics, ctx.ego, ctx.plane);
    if (out.position) out.depth = ctx.ego.to_camera(*out.position).z();
    return out;
}

}  // namespace

std::optional<double> ground_mahalanobis(const Detection2D& det, const Proposal3D& prop,
                                         const FrameContext& ctx, const FusionWeights& w) {
    const DetGround dg = det_ground_point(det, ctx);
    if (!dg.position) return std::nullopt;
    const double prop_depth = ctx.ego.to_camera(prop.position).z();
    const double sd = ground_sigma(w, dg.depth);
    const double sp = ground_sigma(w, prop_depth);
    const double var = sd * sd + sp * sp;
    const double dist = (*dg.position - prop.position).norm();
    return dist / std::sqrt(var);
}

std::vector<std::pair<int, int>> gate_pairs(const std::vector<Detection2D>& dets,
                                            const std::vector<Proposal3D>& props,
                                            const FrameContext& ctx, const FusionWeights& w) {
    std::vector<std::pair<int, int>> pairs;
    if (props.empty()) return pairs;

    const Eigen::Vector3d up = ctx.plane.up_toward(ctx.ego);
    std::vector<std::optional<BBox2D>> prop_boxes(props.size());
    for (std::size_t j = 0; j < props.size(); ++j) {
        prop_boxes[j] = project_box_hull(props[j].position, props[j].size3d, up,
                                         ctx.intrinsics, ctx.ego);
    }

    for (std::size_t i = 0; i < dets.size(); ++i) {
        const DetGround dg = det_ground_point(dets[i], ctx);
        if (!dg.position) continue;
        for (std::size_t j = 0; j < props.size(); ++j) {
            if (!prop_boxes[j]) continue;
            if ((*dg.position - props[j].position).norm() > w.gate_distance) continue;
            if (iou_2d(dets[i].bbox, *prop_boxes[j]) < w.gate_iou) continue;
            pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return pairs;
}

double fusion_unary(const Detection2D& det, const Proposal3D& prop, const SizeStats& stats,
                    const FrameContext& ctx, const FusionWeights& w) {
    const Eigen::Vector3d& mu = stats.mean_of(det.category);
    const Eigen::Vector3d& var = stats.var_of(det.category);
    const Eigen::Vector3d d = prop.size3d - mu;
    const double size_m2 = (d.cwiseProduct(d).cwiseQuotient(var)).sum();
    const double phi_size = std::exp(-0.5 * size_m2);

    double phi_pos = 0.0;
    if (const auto m = ground_mahalanobis(det, prop, ctx, w)) {
        phi_pos = std::exp(-0.5 * (*m) * (*m));
    }

    double phi_proj = 0.0;
    const Eigen::Vector3d up = ctx.plane.up_toward(ctx.ego);
    if (const auto box = project_box_hull(prop.position, prop.size3d, up, ctx.intrinsics, ctx.ego)) {
        phi_proj = iou_2d(det.bbox, *box);
    }

    return -w.w1 * phi_size - w.w2 * phi_pos - w.w3 * phi_proj + w.w4;
}

std::pair<double, bool> fusion_pairwise(const std::pair<int, const Proposal3D*>& a,
                                        const std::pair<int, const Proposal3D*>& b,
                                        const FusionWeights& w) {
    const bool same_det = a.first == b.first;
    const bool same_prop = a.second == b.second;
    if (same_det || same_prop) return {0.0, true};

    const auto& pa = a.second->points;
    const auto& pb = b.second->points;
    if (pa.empty() || pb.empty()) return {0.0, false};

    std::vector<int> inter;
    std::set_intersection(pa.begin(), pa.end(), pb.begin(), pb.end(), std::back_inserter(inter));
    const double denom = static_cast<double>(std::min(pa.size(), pb.size()));
    return {w.w5 * static_cast<double>(inter.size()) / denom, false};
}

std::vector<Observation> fuse_frame(const std::vector<Detection2D>& dets,
                                    const std::vector<Proposal3D>& props,
                                    const SizeStats& stats, const FrameContext& ctx,
                                    const FusionWeights& w, int solver_branches) {
    const auto gated = gate_pairs(dets, props, ctx, w);

    EnergyGraph graph(gated.size());
    for (std::size_t k = 0; k < gated.size(); ++k) {
        graph.set_unary(static_cast<int>(k),
                        fusion_unary(dets[static_cast<std::size_t>(gated[k].first)],
                                     props[static_cast<std::size_t>(gated[k].second)],
                                     stats, ctx, w));
    }
    for (std::size_t a = 0; a < gated.size(); ++a) {
        for (std::size_t b = a + 1; b < gated.size(); ++b) {
            const auto pa = std::make_pair(gated[a].first,
                                           &props[static_cast<std::size_t>(gated[a].second)]);
            const auto pb = std::make_pair(gated[b].first,
                                           &props[static_cast<std::size_t>(gated[b].second)]);
            const auto [pw, excl] = fusion_pairwise(pa, pb, w);
            if (excl) {
                graph.add_exclusion(static_cast<int>(a), static_cast<int>(b));
            } else if (pw != 0.0) {
                graph.add_pairwise(static_cast<int>(a), static_cast<int>(b), pw);
            }
        }
    }

    const Selection sel = solve_multibranch(graph, solver_branches);

    // One fused observation per selected pair, keyed by detection index.
    std::vector<int> fused_prop(dets.size(), -1);
    for (std::size_t k = 0; k < gated.size(); ++k) {
        if (sel.selected[k]) fused_prop[static_cast<std::size_t>(gated[k].first)] = gated[k].second;
    }

    std::vector<Observation> out;
    out.reserve(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
        Observation obs;
        obs.detection = dets[i];
        if (fused_prop[i] >= 0) {
            obs.proposal = props[static_cast<std::size_t>(fused_prop[i])];
            obs.ground_position = obs.proposal->position;
        } else {
            obs.ground_position =
                backproject_to_ground(dets[i].bbox.footpoint(), ctx.intrinsics, ctx.ego, ctx.plane);
        }
        out.push_back(std::move(obs));
    }
    return out;
}

}  // namespace fusetrack
