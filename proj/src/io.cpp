#include "fusetrack/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fusetrack/errors.hpp"

namespace fusetrack {

namespace {

namespace fs = std::filesystem;

constexpr char kProposalHeader[] = "# fusetrack proposals v1";
constexpr char kAppearanceHeader[] = "# fusetrack appearance v1";

std::string fmt(double v) {
    char buf[64];
    if (std::isnan(v)) return "nan";
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

[[noreturn]] void line_error(const std::string& file, int line, const std::string& what) {
    throw InputError(file + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return in;
}

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

double to_double(const std::string& tok, const std::string& file, int line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) line_error(file, line, "bad number '" + tok + "'");
        return v;
    } catch (const std::exception&) {
        line_error(file, line, "bad number '" + tok + "'");
    }
}

int to_int(const std::string& tok, const std::string& file, int line) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(tok, &pos);
        if (pos != tok.size()) line_error(file, line, "bad integer '" + tok + "'");
        return v;
    } catch (const std::exception&) {
        line_error(file, line, "bad integer '" + tok + "'");
    }
}

// KITTI tracking line:
// frame id type truncated occluded alpha left top right bottom h w l x y z rotation_y score
struct KittiRow {
    int frame = 0;
    int id = -1;
    Category category = Category::kCar;
    BBox2D bbox;
    Eigen::Vector3d size3d = Eigen::Vector3d::Ones();  // (w3D, h3D, l3D)
    Eigen::Vector3d location_cam = Eigen::Vector3d::Zero();
    double score = 1.0;
};

std::optional<KittiRow> parse_kitti_line(const std::string& line, const std::string& file,
                                         int line_no) {
    const auto tok = tokenize(line);
    if (tok.empty()) return std::nullopt;
    if (tok.size() != 18)
        line_error(file, line_no, "expected 18 whitespace-separated fields, got " +
                                      std::to_string(tok.size()));
    KittiRow row;
    row.frame = to_int(tok[0], file, line_no);
    row.id = to_int(tok[1], file, line_no);
    const auto cat = category_from_name(tok[2]);
    if (!cat) line_error(file, line_no, "unknown object type '" + tok[2] + "'");
    row.category = *cat;
    const double l = to_double(tok[6], file, line_no);
    const double t = to_double(tok[7], file, line_no);
    const double r = to_double(tok[8], file, line_no);
    const double b = to_double(tok[9], file, line_no);
    row.bbox = BBox2D::from_corners(l, t, r, b);
    const double h3 = to_double(tok[10], file, line_no);
    const double w3 = to_double(tok[11], file, line_no);
    const double l3 = to_double(tok[12], file, line_no);
    row.size3d = Eigen::Vector3d(w3, h3, l3);
    row.location_cam = Eigen::Vector3d(to_double(tok[13], file, line_no),
                                       to_double(tok[14], file, line_no),
                                       to_double(tok[15], file, line_no));
    row.score = to_double(tok[17], file, line_no);
    return row;
}

void write_kitti_line(std::ofstream& out, int frame, long id, Category cat, const BBox2D& bbox,
                      const Eigen::Vector3d& size_whl, const Eigen::Vector3d& loc_cam,
                      double score) {
    out << frame << " " << id << " " << category_name(cat) << " 0 0 " << fmt(0.0) << " "
        << fmt(bbox.left()) << " " << fmt(bbox.top()) << " " << fmt(bbox.right()) << " "
        << fmt(bbox.bottom()) << " " << fmt(size_whl.y()) << " " << fmt(size_whl.x()) << " "
        << fmt(size_whl.z()) << " " << fmt(loc_cam.x()) << " " << fmt(loc_cam.y()) << " "
        << fmt(loc_cam.z()) << " " << fmt(0.0) << " " << fmt(score) << "\n";
}

}  // namespace

SequenceData read_sequence(const std::string& dir) {
    SequenceData seq;

    // calib.txt
    {
        const std::string path = (fs::path(dir) / "calib.txt").string();
        auto in = open_or_throw(path);
        std::string line;
        std::getline(in, line);
        const auto tok = tokenize(line);
        if (tok.size() != 5) line_error(path, 1, "expected: f u0 v0 width height");
        CameraIntrinsics intr;
        intr.f = to_double(tok[0], path, 1);
        intr.u0 = to_double(tok[1], path, 1);
        intr.v0 = to_double(tok[2], path, 1);
        intr.image_width = to_double(tok[3], path, 1);
        intr.image_height = to_double(tok[4], path, 1);
        if (intr.f <= 0) line_error(path, 1, "focal length must be positive");
        FrameContext proto;
        proto.intrinsics = intr;
        seq.contexts.push_back(proto);  // template, expanded below
    }

    GroundPlane plane;
    {
        const std::string path = (fs::path(dir) / "plane.txt").string();
        auto in = open_or_throw(path);
        std::string line;
        std::getline(in, line);
        const auto tok = tokenize(line);
        if (tok.size() != 4) line_error(path, 1, "expected: nx ny nz offset");
        plane.normal = Eigen::Vector3d(to_double(tok[0], path, 1), to_double(tok[1], path, 1),
                                       to_double(tok[2], path, 1));
        const double norm = plane.normal.norm();
        if (norm < 1e-12) line_error(path, 1, "normal must be nonzero");
        plane.normal /= norm;
        plane.offset = to_double(tok[3], path, 1);
    }

    std::vector<EgoPose> poses;
    {
        const std::string path = (fs::path(dir) / "poses.txt").string();
        auto in = open_or_throw(path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto tok = tokenize(line);
            if (tok.empty()) continue;
            if (tok.size() != 12) line_error(path, line_no, "expected 12 values (3x4 row-major)");
            EgoPose pose;
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c)
                    pose.rotation(r, c) = to_double(tok[static_cast<std::size_t>(r * 4 + c)], path, line_no);
                pose.translation[r] = to_double(tok[static_cast<std::size_t>(r * 4 + 3)], path, line_no);
            }
            poses.push_back(pose);
        }
        if (poses.empty()) line_error(path, 1, "no poses");
    }

    std::vector<double> times;
    {
        const std::string path = (fs::path(dir) / "times.txt").string();
        auto in = open_or_throw(path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto tok = tokenize(line);
            if (tok.empty()) continue;
            times.push_back(to_double(tok[0], path, line_no));
            if (times.size() >= 2 && times[times.size() - 1] <= times[times.size() - 2])
                line_error(path, line_no, "timestamps must be strictly increasing");
        }
        if (times.size() != poses.size())
            throw InputError(dir + ": times.txt and poses.txt disagree on frame count");
    }

    const FrameContext proto = seq.contexts.front();
    seq.contexts.clear();
    for (std::size_t k = 0; k < poses.size(); ++k) {
        FrameContext ctx = proto;
        ctx.frame = static_cast<int>(k);
        ctx.timestamp = times[k];
        ctx.ego = poses[k];
        ctx.plane = plane;
        seq.contexts.push_back(ctx);
    }

    const int n_frames = static_cast<int>(seq.contexts.size());
    seq.detections.assign(static_cast<std::size_t>(n_frames), {});
    seq.proposals.assign(static_cast<std::size_t>(n_frames), {});

    {
        const std::string path = (fs::path(dir) / "detections.txt").string();
        auto in = open_or_throw(path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto row = parse_kitti_line(line, path, line_no);
            if (!row) continue;
            if (row->frame < 0 || row->frame >= n_frames)
                line_error(path, line_no, "frame index out of range");
            Detection2D det;
            det.bbox = row->bbox;
            det.category = row->category;
            det.score = row->score;
            seq.detections[static_cast<std::size_t>(row->frame)].push_back(std::move(det));
        }
    }

    {
        const std::string path = (fs::path(dir) / "appearance.txt").string();
        std::ifstream in(path);
        if (in) {
            std::string line;
            int line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line_no == 1 && line == kAppearanceHeader) continue;
                const auto tok = tokenize(line);
                if (tok.empty()) continue;
                if (tok.size() < 3) line_error(path, line_no, "expected: frame det_index dim v...");
                const int frame = to_int(tok[0], path, line_no);
                const int det_idx = to_int(tok[1], path, line_no);
                const int dim = to_int(tok[2], path, line_no);
                if (tok.size() != static_cast<std::size_t>(3 + dim))
                    line_error(path, line_no, "appearance value count mismatch");
                if (frame < 0 || frame >= n_frames) line_error(path, line_no, "frame out of range");
                auto& dets = seq.detections[static_cast<std::size_t>(frame)];
                if (det_idx < 0 || det_idx >= static_cast<int>(dets.size()))
                    line_error(path, line_no, "detection index out of range");
                std::vector<double> app(static_cast<std::size_t>(dim));
                for (int d = 0; d < dim; ++d)
                    app[static_cast<std::size_t>(d)] = to_double(tok[static_cast<std::size_t>(3 + d)], path, line_no);
                dets[static_cast<std::size_t>(det_idx)].appearance = std::move(app);
            }
        }
    }

    {
        const std::string path = (fs::path(dir) / "proposals.txt").string();
        std::ifstream in(path);
        if (in) {
            seq.has_proposals = true;
            std::string line;
            int line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line_no == 1) {
                    if (line != kProposalHeader)
                        line_error(path, 1, std::string("expected header '") + kProposalHeader + "'");
                    continue;
                }
                const auto tok = tokenize(line);
                if (tok.empty()) continue;
                if (tok.size() < 12) line_error(path, line_no, "expected at least 12 fields");
                const int frame = to_int(tok[0], path, line_no);
                if (frame < 0 || frame >= n_frames) line_error(path, line_no, "frame out of range");
                Proposal3D prop;
                prop.position = Eigen::Vector3d(to_double(tok[1], path, line_no),
                                                to_double(tok[2], path, line_no),
                                                to_double(tok[3], path, line_no));
                const double vx = to_double(tok[4], path, line_no);
                const double vy = to_double(tok[5], path, line_no);
                const double vz = to_double(tok[6], path, line_no);
                if (!std::isnan(vx) && !std::isnan(vy) && !std::isnan(vz))
                    prop.velocity = Eigen::Vector3d(vx, vy, vz);
                prop.size3d = Eigen::Vector3d(to_double(tok[7], path, line_no),
                                              to_double(tok[8], path, line_no),
                                              to_double(tok[9], path, line_no));
                prop.score = to_double(tok[10], path, line_no);
                const int n_points = to_int(tok[11], path, line_no);
                if (tok.size() != static_cast<std::size_t>(12 + n_points))
                    line_error(path, line_no, "point id count mismatch");
                prop.points.resize(static_cast<std::size_t>(n_points));
                for (int m = 0; m < n_points; ++m)
                    prop.points[static_cast<std::size_t>(m)] =
                        to_int(tok[static_cast<std::size_t>(12 + m)], path, line_no);
                std::sort(prop.points.begin(), prop.points.end());
                seq.proposals[static_cast<std::size_t>(frame)].push_back(std::move(prop));
            }
        }
    }

    return seq;
}

std::vector<GTTrajectory> read_gt(const std::string& path,
                                  const std::vector<FrameContext>& contexts) {
    auto in = open_or_throw(path);
    std::map<int, GTTrajectory> by_id;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto row = parse_kitti_line(line, path, line_no);
        if (!row) continue;
        if (row->frame < 0 || row->frame >= static_cast<int>(contexts.size()))
            line_error(path, line_no, "frame index out of range");
        GTFrameEntry entry;
        entry.bbox = row->bbox;
        entry.size3d = row->size3d;
        entry.category = row->category;
        entry.position = contexts[static_cast<std::size_t>(row->frame)].ego.to_world(row->location_cam);
        entry.visible = true;
        auto& traj = by_id[row->id];
        traj.id = row->id;
        traj.frames[row->frame] = entry;
    }
    std::vector<GTTrajectory> out;
    out.reserve(by_id.size());
    for (auto& [id, traj] : by_id) out.push_back(std::move(traj));
    return out;
}

void write_gt(const std::string& path, const std::vector<GTTrajectory>& gt,
              const std::vector<FrameContext>& contexts) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path + " for writing");
    std::map<int, std::vector<const GTTrajectory*>> order;
    for (const auto& traj : gt) {
        for (const auto& [f, e] : traj.frames) {
            if (e.visible) order[f].push_back(&traj);
        }
    }
    for (const auto& [f, trajs] : order) {
        for (const GTTrajectory* traj : trajs) {
            const GTFrameEntry& e = traj->frames.at(f);
            const Eigen::Vector3d loc_cam = contexts[static_cast<std::size_t>(f)].ego.to_camera(e.position);
            write_kitti_line(out, f, traj->id, e.category, e.bbox, e.size3d, loc_cam, 1.0);
        }
    }
}

void write_results(const TrackReport& report, const std::vector<FrameContext>& contexts,
                   const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path + " for writing");
    for (const auto& [frame, rows] : report.frames) {
        std::vector<const TrackReportRow*> sorted;
        sorted.reserve(rows.size());
        for (const auto& r : rows) sorted.push_back(&r);
        std::sort(sorted.begin(), sorted.end(),
                  [](const TrackReportRow* a, const TrackReportRow* b) { return a->id < b->id; });
        for (const TrackReportRow* r : sorted) {
            Eigen::Vector3d loc_cam = r->position;
            if (frame >= 0 && frame < static_cast<int>(contexts.size()))
                loc_cam = contexts[static_cast<std::size_t>(frame)].ego.to_camera(r->position);
            write_kitti_line(out, frame, r->id, r->category, r->bbox, r->size3d, loc_cam, r->score);
        }
    }
}

TrackReport read_results(const std::string& path, const std::vector<FrameContext>& contexts) {
    auto in = open_or_throw(path);
    TrackReport report;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto row = parse_kitti_line(line, path, line_no);
        if (!row) continue;
        TrackReportRow r;
        r.id = row->id;
        r.category = row->category;
        r.bbox = row->bbox;
        r.size3d = row->size3d;
        r.position = row->frame >= 0 && row->frame < static_cast<int>(contexts.size())
                         ? contexts[static_cast<std::size_t>(row->frame)].ego.to_world(row->location_cam)
                         : row->location_cam;
        r.score = row->score;
        report.frames[row->frame].push_back(std::move(r));
    }
    return report;
}

void write_contexts(const std::string& dir, const std::vector<FrameContext>& contexts) {
    if (contexts.empty()) throw InputError("write_contexts: empty context list");
    fs::create_directories(dir);

    {
        std::ofstream out((fs::path(dir) / "calib.txt").string());
        const CameraIntrinsics& i = contexts.front().intrinsics;
        out << fmt(i.f) << " " << fmt(i.u0) << " " << fmt(i.v0) << " " << fmt(i.image_width) << " "
            << fmt(i.image_height) << "\n";
    }
    {
        std::ofstream out((fs::path(dir) / "plane.txt").string());
        const GroundPlane& p = contexts.front().plane;
        out << fmt(p.normal.x()) << " " << fmt(p.normal.y()) << " " << fmt(p.normal.z()) << " "
            << fmt(p.offset) << "\n";
    }
    {
        std::ofstream out((fs::path(dir) / "poses.txt").string());
        for (const auto& ctx : contexts) {
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) out << fmt(ctx.ego.rotation(r, c)) << " ";
                out << fmt(ctx.ego.translation[r]) << (r == 2 ? "" : " ");
            }
            out << "\n";
        }
    }
    {
        std::ofstream out((fs::path(dir) / "times.txt").string());
        for (const auto& ctx : contexts) out << fmt(ctx.timestamp) << "\n";
    }
}

void write_detections(const std::string& dir, const std::vector<std::vector<Detection2D>>& dets) {
    fs::create_directories(dir);
    std::ofstream out((fs::path(dir) / "detections.txt").string());
    std::ofstream app((fs::path(dir) / "appearance.txt").string());
    app << kAppearanceHeader << "\n";
    for (std::size_t f = 0; f < dets.size(); ++f) {
        for (std::size_t i = 0; i < dets[f].size(); ++i) {
            const Detection2D& d = dets[f][i];
            write_kitti_line(out, static_cast<int>(f), -1, d.category, d.bbox,
                             Eigen::Vector3d::Ones(), Eigen::Vector3d::Zero(), d.score);
            if (!d.appearance.empty()) {
                app << f << " " << i << " " << d.appearance.size();
                for (const double v : d.appearance) app << " " << fmt(v);
                app << "\n";
            }
        }
    }
}

void write_proposals(const std::string& dir, const std::vector<std::vector<Proposal3D>>& props) {
    fs::create_directories(dir);
    std::ofstream out((fs::path(dir) / "proposals.txt").string());
    out << kProposalHeader << "\n";
    for (std::size_t f = 0; f < props.size(); ++f) {
        for (const Proposal3D& p : props[f]) {
            out << f << " " << fmt(p.position.x()) << " " << fmt(p.position.y()) << " "
                << fmt(p.position.z()) << " ";
            if (p.velocity) {
                out << fmt(p.velocity->x()) << " " << fmt(p.velocity->y()) << " "
                    << fmt(p.velocity->z()) << " ";
            } else {
                out << "nan nan nan ";
            }
            out << fmt(p.size3d.x()) << " " << fmt(p.size3d.y()) << " " << fmt(p.size3d.z()) << " "
                << fmt(p.score) << " " << p.points.size();
            for (const int id : p.points) out << " " << id;
            out << "\n";
        }
    }
}

void write_observations(const std::string& path,
                        const std::vector<std::vector<Observation>>& obs_per_frame) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path + " for writing");
    out << "# fusetrack observations v1: frame det_index fused x y z w3d h3d l3d\n";
    for (std::size_t f = 0; f < obs_per_frame.size(); ++f) {
        for (std::size_t i = 0; i < obs_per_frame[f].size(); ++i) {
            const Observation& o = obs_per_frame[f][i];
            out << f << " " << i << " " << (o.fused() ? 1 : 0);
            if (o.fused()) {
                out << " " << fmt(o.proposal->position.x()) << " " << fmt(o.proposal->position.y())
                    << " " << fmt(o.proposal->position.z()) << " " << fmt(o.proposal->size3d.x())
                    << " " << fmt(o.proposal->size3d.y()) << " " << fmt(o.proposal->size3d.z());
            } else if (o.ground_position) {
                out << " " << fmt(o.ground_position->x()) << " " << fmt(o.ground_position->y())
                    << " " << fmt(o.ground_position->z()) << " nan nan nan";
            } else {
                out << " nan nan nan nan nan nan";
            }
            out << "\n";
        }
    }
}

}  // namespace fusetrack
