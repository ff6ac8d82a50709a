#include "fusetrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "fusetrack/crf.hpp"

namespace fusetrack {

namespace {

double histogram_intersection(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty() || a.size() != b.size()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::min(a[i], b[i]);
    return s;
}

// Squared Mahalanobis distance of a ground point under the filter's
// predicted position marginal, evaluated in the two in-plane directions.
double ground_mahalanobis_sq(const Eigen::Vector3d& obs_pos, const CoupledState& state,
                             const GroundPlane& plane) {
    Eigen::Vector3d seed(0.0, 0.0, 1.0);
    if (std::abs(plane.normal.dot(seed)) > 0.9) seed = Eigen::Vector3d(1.0, 0.0, 0.0);
    const Eigen::Vector3d e1 = plane.normal.cross(seed).normalized();
    const Eigen::Vector3d e2 = plane.normal.cross(e1).normalized();
    Eigen::Matrix<double, 3, 2> basis;
    basis.col(0) = e1;
    basis.col(1) = e2;

    const Eigen::Matrix3d pos_cov = state.covariance.block<3, 3>(8, 8);
    Eigen::Matrix2d cov2 = basis.transpose() * pos_cov * basis;
    cov2 += 1e-9 * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d delta = basis.transpose() * (obs_pos - state.position());
    return delta.dot(cov2.inverse() * delta);
}

}  // namespace

Category TrackHypothesis::category() const {
    int best = 0;
    category_dist.maxCoeff(&best);
    return static_cast<Category>(best);
}

double affinity(const Observation& obs, const TrackHypothesis& hyp, const FrameContext& ctx,
                const TrackerConfig& cfg) {
    const bool immature = hyp.inliers.size() < 3;
    if (!immature && obs.detection.category != hyp.category()) return 0.0;

    const bool has_appearance = !obs.detection.appearance.empty() && !hyp.appearance.empty();
    const double w_c = has_appearance ? cfg.w_c : 0.0;

    double w_m = 0.0;
    double phi_m = 0.0;
    if (obs.ground_position) {
        const double d = (*obs.ground_position - ctx.ego.center()).norm();
        w_m = (1.0 - w_c) * std::exp(-cfg.gamma * d);
        phi_m = std::exp(-0.5 * ground_mahalanobis_sq(*obs.ground_position, hyp.state, ctx.plane));
    }
    const double w_p = 1.0 - w_c - w_m;

    const double phi_c = has_appearance ? histogram_intersection(obs.detection.appearance, hyp.appearance) : 0.0;
    const double phi_p = iou_2d(hyp.state.bbox(), obs.detection.bbox);

    return w_c * phi_c + w_m * phi_m + w_p * phi_p;
}

double hypothesis_unary(const TrackHypothesis& hyp, int current_frame, const TrackerConfig& cfg) {
    double u = cfg.w_h_min;
    for (const auto& [t, rec] : hyp.inliers) {
        u -= std::exp(-cfg.tau * static_cast<double>(current_frame - t)) * rec.obs.detection.score *
             rec.affinity;
    }
    return u;
}

double hypothesis_pairwise(const TrackHypothesis& a, const TrackHypothesis& b,
                           const TrackerConfig& cfg) {
    double overlap = 0.0;
    const auto& small = a.bbox_history.size() <= b.bbox_history.size() ? a.bbox_history : b.bbox_history;
    const auto& large = a.bbox_history.size() <= b.bbox_history.size() ? b.bbox_history : a.bbox_history;
    for (const auto& [t, box] : small) {
        const auto it = large.find(t);
        if (it == large.end()) continue;
        const double iou = iou_2d(box, it->second);
        overlap += iou * iou;
    }

    int shared = 0;
    const auto& si = a.inliers.size() <= b.inliers.size() ? a.inliers : b.inliers;
    const auto& li = a.inliers.size() <= b.inliers.size() ? b.inliers : a.inliers;
    for (const auto& [t, rec] : si) {
        const auto it = li.find(t);
        if (it != li.end() && it->second.obs_index == rec.obs_index) ++shared;
    }

    return cfg.w_h_ol * overlap + cfg.w_h_sh * static_cast<double>(shared);
}

Tracker::Tracker(const CouplingWeights& cw, const NoiseConfig& noise, const SizeStats& stats,
                 const TrackerConfig& cfg, bool use_ground)
    : cw_(cw), noise_(noise), stats_(stats), cfg_(cfg), use_ground_(use_ground) {}

void Tracker::predict_all(const FrameContext& ctx) {
    const double dt = ctx.timestamp - prev_ctx_.timestamp;
    if (dt <= 0.0) throw std::invalid_argument("Tracker: timestamps must be strictly increasing");
    for (auto& [id, hyp] : hyps_) {
        const auto pred = predict(hyp.state, dt, ctx.intrinsics, prev_ctx_.ego, ctx.ego, cw_, noise_);
        if (pred) {
            hyp.state = *pred;
            hyp.extrapolating = false;
            hyp.frames_extrapolating = 0;
        } else {
            hyp.extrapolating = true;
            ++hyp.frames_extrapolating;
        }
    }
}

void Tracker::associate(TrackHypothesis& hyp, const Observation& obs, int obs_index,
                        double affinity_value, const FrameContext& ctx) {
    if (obs.fused()) {
        hyp.state = update_fused(hyp.state, obs, noise_);
    } else if (use_ground_) {
        hyp.state = update_partial(hyp.state, obs, ctx, stats_, noise_);
    } else {
        hyp.state = update_bbox_only(hyp.state, obs.detection, noise_);
    }
    hyp.last_update = ctx.frame;
    hyp.inliers[ctx.frame] = InlierRecord{obs_index, obs, affinity_value};

    // Forward Bayesian filtering of the category distribution.
    const int c = static_cast<int>(obs.detection.category);
    const Eigen::Vector3d updated = hyp.category_dist.cwiseProduct(cfg_.confusion.col(c));
    const double total = updated.sum();
    if (total > 1e-300) hyp.category_dist = updated / total;

    if (!obs.detection.appearance.empty()) {
        if (hyp.appearance.size() != obs.detection.appearance.size()) {
            hyp.appearance = obs.detection.appearance;
        } else {
            double sum = 0.0;
            for (std::size_t i = 0; i < hyp.appearance.size(); ++i) {
                hyp.appearance[i] = (1.0 - cfg_.appearance_alpha) * hyp.appearance[i] +
                                    cfg_.appearance_alpha * obs.detection.appearance[i];
                sum += hyp.appearance[i];
            }
            if (sum > 0.0) {
                for (double& v : hyp.appearance) v /= sum;
            }
        }
    }
}

void Tracker::extend_and_branch(const std::vector<Observation>& observations,
                                const FrameContext& ctx) {
    std::vector<std::int64_t> ids;
    ids.reserve(hyps_.size());
    for (const auto& [id, hyp] : hyps_) ids.push_back(id);

    for (const std::int64_t id : ids) {
        TrackHypothesis& hyp = hyps_.at(id);
        if (hyp.extrapolating) continue;

        int best = -1;
        double best_aff = 0.0;
        std::vector<int> branch_cands;
        for (int k = 0; k < static_cast<int>(observations.size()); ++k) {
            const Observation& obs = observations[static_cast<std::size_t>(k)];
            const double a = affinity(obs, hyp, ctx, cfg_);
            if (a >= cfg_.min_affinity && (best < 0 || a > best_aff)) {
                best = k;
                best_aff = a;
            }

            // Branch test: very close in image space, on the ground plane,
            // and in appearance, all at once.
            const BBox2D pred_box = hyp.state.bbox();
            const double center_dist = std::hypot(obs.detection.bbox.x - pred_box.x,
                                                  obs.detection.bbox.y - pred_box.y);
            if (center_dist > cfg_.branch_center_px) continue;
            if (use_ground_) {
                if (!obs.ground_position) continue;
                if ((*obs.ground_position - hyp.state.position()).norm() > cfg_.branch_ground_m)
                    continue;
            }
            if (!obs.detection.appearance.empty() && !hyp.appearance.empty() &&
                histogram_intersection(obs.detection.appearance, hyp.appearance) <
                    cfg_.branch_appearance)
                continue;
            branch_cands.push_back(k);
        }

        if (best < 0) continue;

        if (branch_cands.size() >= 2) {
            const CoupledState predicted = hyp.state;
            for (const int k : branch_cands) {
                if (k == best) continue;
                TrackHypothesis clone = hyp;
                clone.id = next_id_++;
                clone.state = predicted;
                const double a = affinity(observations[static_cast<std::size_t>(k)], clone, ctx, cfg_);
                associate(clone, observations[static_cast<std::size_t>(k)], k, a, ctx);
                clone.bbox_history[ctx.frame] = clone.state.bbox();
                seed_of_[clone.id] = seed_of_.at(id);
                hyps_.emplace(clone.id, std::move(clone));
            }
        }

        associate(hyp, observations[static_cast<std::size_t>(best)], best, best_aff, ctx);
    }

    // Record the filtered (or merely predicted) box of every live hypothesis.
    for (auto& [id, hyp] : hyps_) {
        if (!hyp.extrapolating) hyp.bbox_history[ctx.frame] = hyp.state.bbox();
    }
}

void Tracker::spawn_from(const StoredFrame& origin, int obs_index, const FrameContext& now) {
    const Observation& obs = origin.observations[static_cast<std::size_t>(obs_index)];

    std::optional<CoupledState> state;
    if (use_ground_) {
        state = init_state(obs, origin.ctx, stats_, noise_);
        if (!state) return;  // footpoint above the horizon, nothing to seed
    } else {
        state = init_state_bbox_only(obs.detection, stats_, noise_);
    }

    TrackHypothesis hyp;
    hyp.id = next_id_++;
    hyp.state = *state;
    hyp.born = origin.ctx.frame;
    hyp.last_update = origin.ctx.frame;
    hyp.last_selected = origin.ctx.frame;
    hyp.inliers[origin.ctx.frame] = InlierRecord{obs_index, obs, 1.0};
    hyp.bbox_history[origin.ctx.frame] = hyp.state.bbox();
    hyp.appearance = obs.detection.appearance;

    const int c = static_cast<int>(obs.detection.category);
    const Eigen::Vector3d updated = hyp.category_dist.cwiseProduct(cfg_.confusion.col(c));
    const double total = updated.sum();
    if (total > 1e-300) hyp.category_dist = updated / total;

    // Bring a window-delayed seed up to the current frame.
    if (origin.ctx.frame != now.frame) {
        const FrameContext* prev = &origin.ctx;
        for (const StoredFrame& step : recent_) {
            if (step.ctx.frame <= origin.ctx.frame) continue;
            const double dt = step.ctx.timestamp - prev->timestamp;
            const auto pred =
                predict(hyp.state, dt, step.ctx.intrinsics, prev->ego, step.ctx.ego, cw_, noise_);
            if (!pred) return;  // left the frustum before reaching the present
            hyp.state = *pred;
            hyp.bbox_history[step.ctx.frame] = hyp.state.bbox();
            prev = &step.ctx;
        }
    }

    anchored_.insert({origin.ctx.frame, obs_index});
    seed_of_[hyp.id] = {origin.ctx.frame, obs_index};
    hyps_.emplace(hyp.id, std::move(hyp));
}

void Tracker::spawn_new(const FrameContext& ctx) {
    // Observations currently claimed by some hypothesis do not seed new ones.
    std::set<std::pair<int, int>> claimed;
    for (const auto& [id, hyp] : hyps_) {
        for (const auto& [t, rec] : hyp.inliers) claimed.insert({t, rec.obs_index});
    }

    for (const StoredFrame& sf : recent_) {
        for (int k = 0; k < static_cast<int>(sf.observations.size()); ++k) {
            const std::pair<int, int> key{sf.ctx.frame, k};
            if (claimed.count(key) || anchored_.count(key)) continue;
            spawn_from(sf, k, ctx);
        }
    }
}

std::vector<std::int64_t> Tracker::select(int frame) {
    std::vector<std::int64_t> ids;
    ids.reserve(hyps_.size());
    for (const auto& [id, hyp] : hyps_) ids.push_back(id);

    EnergyGraph graph(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        graph.set_unary(static_cast<int>(i), hypothesis_unary(hyps_.at(ids[i]), frame, cfg_));
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            const double p = hypothesis_pairwise(hyps_.at(ids[i]), hyps_.at(ids[j]), cfg_);
            if (p > 0.0) graph.add_pairwise(static_cast<int>(i), static_cast<int>(j), p);
        }
    }

    const Selection sel = solve_multibranch(graph, cfg_.solver_branches);
    std::vector<std::int64_t> selected;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (sel.selected[i]) {
            selected.push_back(ids[i]);
            hyps_.at(ids[i]).last_selected = frame;
        }
    }
    return selected;
}

void Tracker::prune(int frame) {
    // Exact duplicates: identical claimed-observation sets. Keep the oldest.
    std::map<std::vector<std::pair<int, int>>, std::int64_t> seen;
    std::vector<std::int64_t> to_erase;
    for (const auto& [id, hyp] : hyps_) {
        std::vector<std::pair<int, int>> key;
        key.reserve(hyp.inliers.size());
        for (const auto& [t, rec] : hyp.inliers) key.emplace_back(t, rec.obs_index);
        const auto [it, inserted] = seen.emplace(std::move(key), id);
        if (!inserted) to_erase.push_back(id);
    }

    for (const auto& [id, hyp] : hyps_) {
        if (std::find(to_erase.begin(), to_erase.end(), id) != to_erase.end()) continue;
        if (frame - hyp.last_selected >= cfg_.n_prune) {
            to_erase.push_back(id);
        } else if (hyp.extrapolating && hyp.frames_extrapolating > cfg_.t_extrap) {
            to_erase.push_back(id);
        }
    }

    const int window_lo = frame - cfg_.w_spawn + 1;
    for (const std::int64_t id : to_erase) {
        const auto seed_it = seed_of_.find(id);
        if (seed_it != seed_of_.end()) {
            // Free a recent seed so the observation may start a fresh track.
            if (seed_it->second.first >= window_lo) anchored_.erase(seed_it->second);
            seed_of_.erase(seed_it);
        }
        hyps_.erase(id);
    }
}

std::vector<TrackReportRow> Tracker::advance_frame(const std::vector<Observation>& observations,
                                                   const FrameContext& ctx) {
    if (has_prev_) predict_all(ctx);

    recent_.push_back(StoredFrame{ctx, observations});
    while (static_cast<int>(recent_.size()) > cfg_.w_spawn) {
        recent_.pop_front();
    }

    extend_and_branch(observations, ctx);
    spawn_new(ctx);
    const std::vector<std::int64_t> selected = select(ctx.frame);
    prune(ctx.frame);

    std::vector<TrackReportRow> rows;
    for (const std::int64_t id : selected) {
        const auto it = hyps_.find(id);
        if (it == hyps_.end() || it->second.extrapolating) continue;
        const TrackHypothesis& hyp = it->second;
        TrackReportRow row;
        row.id = hyp.id;
        row.category = hyp.category();
        row.bbox = hyp.state.bbox();
        row.position = hyp.state.position();
        row.size3d = hyp.state.size3d();
        row.score = -hypothesis_unary(hyp, ctx.frame, cfg_);
        rows.push_back(row);
    }

    has_prev_ = true;
    prev_ctx_ = ctx;
    return rows;
}

}  // namespace fusetrack
