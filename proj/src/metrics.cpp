#include "fusetrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

namespace fusetrack {

std::vector<std::pair<double, double>> default_ranges() {
    const double inf = std::numeric_limits<double>::infinity();
    return {{0.0, 10.0}, {10.0, 20.0}, {20.0, 30.0}, {30.0, 50.0}, {50.0, inf}};
}

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    // Potential-based Hungarian algorithm, O(n^3), 1-based internals.
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = std::numeric_limits<double>::infinity();
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        if (p[static_cast<std::size_t>(j)] > 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
    return row_to_col;
}

std::vector<std::pair<int, int>> match_frame(const std::vector<BBox2D>& gt_boxes,
                                             const std::vector<BBox2D>& track_boxes,
                                             double iou_threshold,
                                             const std::vector<std::pair<int, int>>& carried) {
    if (iou_threshold <= 0.0 || iou_threshold >= 1.0)
        throw std::invalid_argument("match_frame: iou_threshold must be in (0,1)");

    std::vector<std::pair<int, int>> matches;
    std::vector<char> gt_used(gt_boxes.size(), 0), tr_used(track_boxes.size(), 0);

    // CLEAR-MOT continuity: keep last frame's pairs that still overlap.
    for (const auto& [gi, ti] : carried) {
        if (gi < 0 || ti < 0) continue;
        if (static_cast<std::size_t>(gi) >= gt_boxes.size() ||
            static_cast<std::size_t>(ti) >= track_boxes.size())
            continue;
        if (gt_used[static_cast<std::size_t>(gi)] || tr_used[static_cast<std::size_t>(ti)]) continue;
        if (iou_2d(gt_boxes[static_cast<std::size_t>(gi)], track_boxes[static_cast<std::size_t>(ti)]) <
            iou_threshold)
            continue;
        matches.emplace_back(gi, ti);
        gt_used[static_cast<std::size_t>(gi)] = 1;
        tr_used[static_cast<std::size_t>(ti)] = 1;
    }

    std::vector<int> free_gt, free_tr;
    for (std::size_t i = 0; i < gt_boxes.size(); ++i)
        if (!gt_used[i]) free_gt.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < track_boxes.size(); ++j)
        if (!tr_used[j]) free_tr.push_back(static_cast<int>(j));
    if (free_gt.empty() || free_tr.empty()) return matches;

    // Maximum-total-IoU assignment over the remainder; pairs below the
    // threshold act like non-matches (zero gain).
    const std::size_t n = std::max(free_gt.size(), free_tr.size());
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
    for (std::size_t a = 0; a < free_gt.size(); ++a) {
        for (std::size_t b = 0; b < free_tr.size(); ++b) {
            const double iou = iou_2d(gt_boxes[static_cast<std::size_t>(free_gt[a])],
                                      track_boxes[static_cast<std::size_t>(free_tr[b])]);
            if (iou >= iou_threshold) cost[a][b] = -iou;
        }
    }
    const std::vector<int> assigned = solve_assignment(cost);
    for (std::size_t a = 0; a < free_gt.size(); ++a) {
        const int b = assigned[a];
        if (b < 0 || static_cast<std::size_t>(b) >= free_tr.size()) continue;
        if (cost[a][static_cast<std::size_t>(b)] < 0.0)
            matches.emplace_back(free_gt[a], free_tr[static_cast<std::size_t>(b)]);
    }
    std::sort(matches.begin(), matches.end());
    return matches;
}

MotReport evaluate(const std::vector<GTTrajectory>& gt, const TrackReport& report,
                   const std::vector<FrameContext>& contexts, double iou_threshold,
                   const std::vector<std::pair<double, double>>& ranges) {
    std::map<int, const FrameContext*> ctx_by_frame;
    for (const auto& ctx : contexts) ctx_by_frame[ctx.frame] = &ctx;

    std::set<int> frames;
    for (const auto& traj : gt) {
        for (const auto& [f, e] : traj.frames)
            if (e.visible) frames.insert(f);
    }
    for (const auto& [f, rows] : report.frames)
        if (!rows.empty()) frames.insert(f);

    struct GtState {
        std::int64_t last_track = -1;
        bool ever_matched = false;
        bool in_gap = false;
        long visible = 0;
        long matched = 0;
    };
    std::map<int, GtState> gt_state;
    for (const auto& traj : gt) gt_state[traj.id];

    MotReport rep;
    rep.by_range.reserve(ranges.size());
    for (const auto& [lo, hi] : ranges) rep.by_range.push_back({lo, hi, 0.0, 0.0, 0});
    std::vector<double> range_iou(ranges.size(), 0.0), range_dist(ranges.size(), 0.0);

    double iou_sum = 0.0, dist_sum = 0.0;
    long total_gt = 0;
    std::map<int, std::int64_t> prev_match;  // gt id -> track id from the previous frame

    for (const int f : frames) {
        std::vector<int> gt_ids;
        std::vector<BBox2D> gt_boxes;
        std::vector<const GTFrameEntry*> gt_entries;
        for (const auto& traj : gt) {
            const auto it = traj.frames.find(f);
            if (it == traj.frames.end() || !it->second.visible) continue;
            gt_ids.push_back(traj.id);
            gt_boxes.push_back(it->second.bbox);
            gt_entries.push_back(&it->second);
        }

        const auto rows_it = report.frames.find(f);
        static const std::vector<TrackReportRow> kNoRows;
        const auto& rows = rows_it != report.frames.end() ? rows_it->second : kNoRows;
        std::vector<BBox2D> tr_boxes;
        tr_boxes.reserve(rows.size());
        for (const auto& r : rows) tr_boxes.push_back(r.bbox);

        std::vector<std::pair<int, int>> carried;
        for (std::size_t a = 0; a < gt_ids.size(); ++a) {
            const auto pm = prev_match.find(gt_ids[a]);
            if (pm == prev_match.end()) continue;
            for (std::size_t b = 0; b < rows.size(); ++b) {
                if (rows[b].id == pm->second) {
                    carried.emplace_back(static_cast<int>(a), static_cast<int>(b));
                    break;
                }
            }
        }

        const auto matches = match_frame(gt_boxes, tr_boxes, iou_threshold, carried);

        total_gt += static_cast<long>(gt_boxes.size());
        rep.tp += static_cast<long>(matches.size());
        rep.fp += static_cast<long>(tr_boxes.size() - matches.size());
        rep.fn += static_cast<long>(gt_boxes.size() - matches.size());

        Eigen::Vector3d cam_center = Eigen::Vector3d::Zero();
        const auto cit = ctx_by_frame.find(f);
        if (cit != ctx_by_frame.end()) cam_center = cit->second->ego.center();

        std::vector<char> gt_matched(gt_boxes.size(), 0);
        prev_match.clear();
        for (const auto& [a, b] : matches) {
            gt_matched[static_cast<std::size_t>(a)] = 1;
            const int gid = gt_ids[static_cast<std::size_t>(a)];
            const TrackReportRow& row = rows[static_cast<std::size_t>(b)];
            GtState& st = gt_state[gid];

            if (st.ever_matched && st.last_track != row.id) ++rep.id_switches;
            if (st.in_gap) {
                ++rep.fragmentations;
                st.in_gap = false;
            }
            st.ever_matched = true;
            st.last_track = row.id;
            ++st.matched;
            prev_match[gid] = row.id;

            const double iou = iou_2d(gt_boxes[static_cast<std::size_t>(a)], row.bbox);
            const double dist = (gt_entries[static_cast<std::size_t>(a)]->position - row.position).norm();
            iou_sum += iou;
            dist_sum += dist;

            const double cam_dist = (gt_entries[static_cast<std::size_t>(a)]->position - cam_center).norm();
            for (std::size_t r = 0; r < ranges.size(); ++r) {
                if (cam_dist >= ranges[r].first && cam_dist < ranges[r].second) {
                    range_iou[r] += iou;
                    range_dist[r] += dist;
                    ++rep.by_range[r].tp;
                    break;
                }
            }
        }

        for (std::size_t a = 0; a < gt_boxes.size(); ++a) {
            GtState& st = gt_state[gt_ids[a]];
            ++st.visible;
            if (!gt_matched[a] && st.ever_matched) st.in_gap = true;
        }
    }

    rep.mota = total_gt > 0
                   ? 1.0 - static_cast<double>(rep.fn + rep.fp + rep.id_switches) / static_cast<double>(total_gt)
                   : 1.0;
    rep.motp2d = rep.tp > 0 ? iou_sum / static_cast<double>(rep.tp) : 1.0;
    rep.motp3d = rep.tp > 0 ? dist_sum / static_cast<double>(rep.tp) : 0.0;
    for (std::size_t r = 0; r < ranges.size(); ++r) {
        rep.by_range[r].motp2d = rep.by_range[r].tp > 0 ? range_iou[r] / static_cast<double>(rep.by_range[r].tp) : 0.0;
        rep.by_range[r].motp3d = rep.by_range[r].tp > 0 ? range_dist[r] / static_cast<double>(rep.by_range[r].tp) : 0.0;
    }

    for (const auto& traj : gt) {
        const GtState& st = gt_state[traj.id];
        if (st.visible == 0) {
            ++rep.mostly_lost;
            continue;
        }
        const double ratio = static_cast<double>(st.matched) / static_cast<double>(st.visible);
        if (ratio >= 0.8) {
            ++rep.mostly_tracked;
        } else if (ratio <= 0.2) {
            ++rep.mostly_lost;
        } else {
            ++rep.partly_tracked;
        }
    }

    return rep;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void write_summary_csv(const MotReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_summary_csv: cannot open " + path);
    out << "metric,value\n";
    out << "mota," << fmt(report.mota) << "\n";
    out << "motp2d," << fmt(report.motp2d) << "\n";
    out << "motp3d," << fmt(report.motp3d) << "\n";
    out << "id_switches," << report.id_switches << "\n";
    out << "fragmentations," << report.fragmentations << "\n";
    out << "mostly_tracked," << report.mostly_tracked << "\n";
    out << "partly_tracked," << report.partly_tracked << "\n";
    out << "mostly_lost," << report.mostly_lost << "\n";
    out << "tp," << report.tp << "\n";
    out << "fp," << report.fp << "\n";
    out << "fn," << report.fn << "\n";
}

void write_range_csv(const MotReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_range_csv: cannot open " + path);
    out << "range_lo,range_hi,motp2d,motp3d,tp\n";
    for (const auto& r : report.by_range) {
        out << fmt(r.lo) << "," << fmt(r.hi) << "," << fmt(r.motp2d) << "," << fmt(r.motp3d) << ","
            << r.tp << "\n";
    }
}

}  // namespace fusetrack
