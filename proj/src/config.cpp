#include "fusetrack/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fusetrack/errors.hpp"

namespace fusetrack {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
    throw InputError("config: field '" + field + "' " + what);
}

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) fail(field, what);
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& scope) {
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key))
            throw InputError("config: unknown key '" + (scope.empty() ? key : scope + "." + key) + "'");
    }
}

double num(const json& j, const std::string& scope, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) fail(scope + "." + key, "must be a number");
    return j.at(key).get<double>();
}

int integer(const json& j, const std::string& scope, const std::string& key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) fail(scope + "." + key, "must be an integer");
    return j.at(key).get<int>();
}

Eigen::Vector3d vec3(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3) fail(field, "must be an array of 3 numbers");
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json parse_json(const std::string& text, const char* what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw InputError(std::string(what) + ": not valid JSON");
    if (!j.is_object()) throw InputError(std::string(what) + ": top level must be an object");
    return j;
}

}  // namespace

void validate(const PipelineConfig& cfg) {
    const auto& f = cfg.fusion;
    require(f.w1 >= 0 && f.w2 >= 0 && f.w3 >= 0 && f.w4 >= 0 && f.w5 >= 0 && f.w6 >= 0,
            "fusion.w1..w6", "must be nonnegative");
    require(f.gate_distance > 0, "fusion.gate_distance", "must be positive");
    require(f.gate_iou >= 0 && f.gate_iou <= 1, "fusion.gate_iou", "must be in [0,1]");
    require(f.pos_sigma0 > 0, "fusion.pos_sigma0", "must be positive");
    require(f.pos_sigma_quad >= 0, "fusion.pos_sigma_quad", "must be nonnegative");

    require(cfg.coupling.w_a >= 0 && cfg.coupling.w_a <= 1, "coupling.w_a", "must be in [0,1]");
    require(cfg.coupling.w_b >= 0 && cfg.coupling.w_b <= 1, "coupling.w_b", "must be in [0,1]");
    require(std::abs(cfg.coupling.w_a + cfg.coupling.w_b - 1.0) <= 1e-9, "coupling.w_a",
            "must satisfy w_a + w_b = 1");

    const auto& n = cfg.noise;
    require(n.process_bbox > 0, "noise.process_bbox", "must be positive");
    require(n.process_pos > 0, "noise.process_pos", "must be positive");
    require(n.process_size > 0, "noise.process_size", "must be positive");
    require(n.meas_bbox_var > 0, "noise.meas_bbox_var", "must be positive");
    require(n.meas_pos_var > 0, "noise.meas_pos_var", "must be positive");
    require(n.meas_vel_var > 0, "noise.meas_vel_var", "must be positive");
    require(n.meas_size_var > 0, "noise.meas_size_var", "must be positive");
    require(n.partial_pos_sigma0 > 0, "noise.partial_pos_sigma0", "must be positive");
    require(n.partial_pos_quad >= 0, "noise.partial_pos_quad", "must be nonnegative");
    require(n.mean_size_var > 0, "noise.mean_size_var", "must be positive");
    require(n.partial_pos_sigma0 * n.partial_pos_sigma0 >= n.meas_pos_var,
            "noise.partial_pos_sigma0",
            "squared must be at least noise.meas_pos_var (partial is the inflated variance)");
    require(n.init_bbox_var > 0 && n.init_bbox_vel_var > 0 && n.init_pos_var > 0 &&
                n.init_vel_var > 0 && n.init_size_var > 0,
            "noise.init_*", "must be positive");

    const auto& t = cfg.tracker;
    require(t.w_c >= 0 && t.w_c <= 1, "tracker.w_c", "must be in [0,1]");
    require(t.tau >= 0, "tracker.tau", "must be nonnegative");
    require(t.gamma >= 0, "tracker.gamma", "must be nonnegative");
    require(t.w_h_ol >= 0, "tracker.w_h_ol", "must be nonnegative");
    require(t.w_h_sh >= 0, "tracker.w_h_sh", "must be nonnegative");
    require(t.min_affinity >= 0 && t.min_affinity <= 1, "tracker.min_affinity", "must be in [0,1]");
    require(t.t_extrap >= 1, "tracker.t_extrap", "must be at least 1");
    require(t.n_prune >= 1, "tracker.n_prune", "must be at least 1");
    require(t.w_spawn >= 1, "tracker.w_spawn", "must be at least 1");
    require(t.solver_branches >= 1, "tracker.solver_branches", "must be at least 1");
    require(t.appearance_alpha >= 0 && t.appearance_alpha <= 1, "tracker.appearance_alpha",
            "must be in [0,1]");
    for (int r = 0; r < 3; ++r) {
        double row = 0.0;
        for (int c = 0; c < 3; ++c) {
            require(t.confusion(r, c) >= 0, "tracker.confusion", "entries must be nonnegative");
            row += t.confusion(r, c);
        }
        require(row > 0, "tracker.confusion", "rows must not be all zero");
    }

    for (int c = 0; c < kNumCategories; ++c) {
        for (int d = 0; d < 3; ++d) {
            require(cfg.size_stats.mean[c][d] > 0, "size_stats.mean", "must be positive");
            require(cfg.size_stats.variance[c][d] > 0, "size_stats.variance", "must be positive");
        }
    }

    require(cfg.metrics_iou_threshold > 0 && cfg.metrics_iou_threshold < 1,
            "metrics.iou_threshold", "must be in (0,1)");
    require(cfg.solver_branches >= 1, "solver_branches", "must be at least 1");
}

PipelineConfig parse_config(const std::string& json_text) {
    const json j = parse_json(json_text, "config");
    reject_unknown(j, {"fusion", "coupling", "noise", "tracker", "size_stats", "metrics",
                       "solver_branches"},
                   "");

    PipelineConfig cfg;

    if (j.contains("fusion")) {
        const json& f = j.at("fusion");
        reject_unknown(f, {"w1", "w2", "w3", "w4", "w5", "w6", "gate_distance", "gate_iou",
                           "pos_sigma0", "pos_sigma_quad"},
                       "fusion");
        cfg.fusion.w1 = num(f, "fusion", "w1", cfg.fusion.w1);
        cfg.fusion.w2 = num(f, "fusion", "w2", cfg.fusion.w2);
        cfg.fusion.w3 = num(f, "fusion", "w3", cfg.fusion.w3);
        cfg.fusion.w4 = num(f, "fusion", "w4", cfg.fusion.w4);
        cfg.fusion.w5 = num(f, "fusion", "w5", cfg.fusion.w5);
        cfg.fusion.w6 = num(f, "fusion", "w6", cfg.fusion.w6);
        cfg.fusion.gate_distance = num(f, "fusion", "gate_distance", cfg.fusion.gate_distance);
        cfg.fusion.gate_iou = num(f, "fusion", "gate_iou", cfg.fusion.gate_iou);
        cfg.fusion.pos_sigma0 = num(f, "fusion", "pos_sigma0", cfg.fusion.pos_sigma0);
        cfg.fusion.pos_sigma_quad = num(f, "fusion", "pos_sigma_quad", cfg.fusion.pos_sigma_quad);
    }

    if (j.contains("coupling")) {
        const json& c = j.at("coupling");
        reject_unknown(c, {"w_a", "w_b"}, "coupling");
        cfg.coupling.w_a = num(c, "coupling", "w_a", cfg.coupling.w_a);
        cfg.coupling.w_b = num(c, "coupling", "w_b", 1.0 - cfg.coupling.w_a);
    }

    if (j.contains("noise")) {
        const json& n = j.at("noise");
        reject_unknown(n,
                       {"process_bbox", "process_pos", "process_size", "meas_bbox_var",
                        "meas_pos_var", "meas_vel_var", "meas_size_var", "partial_pos_sigma0",
                        "partial_pos_quad", "mean_size_var", "init_bbox_var", "init_bbox_vel_var",
                        "init_pos_var", "init_vel_var", "init_size_var"},
                       "noise");
        cfg.noise.process_bbox = num(n, "noise", "process_bbox", cfg.noise.process_bbox);
        cfg.noise.process_pos = num(n, "noise", "process_pos", cfg.noise.process_pos);
        cfg.noise.process_size = num(n, "noise", "process_size", cfg.noise.process_size);
        cfg.noise.meas_bbox_var = num(n, "noise", "meas_bbox_var", cfg.noise.meas_bbox_var);
        cfg.noise.meas_pos_var = num(n, "noise", "meas_pos_var", cfg.noise.meas_pos_var);
        cfg.noise.meas_vel_var = num(n, "noise", "meas_vel_var", cfg.noise.meas_vel_var);
        cfg.noise.meas_size_var = num(n, "noise", "meas_size_var", cfg.noise.meas_size_var);
        cfg.noise.partial_pos_sigma0 = num(n, "noise", "partial_pos_sigma0", cfg.noise.partial_pos_sigma0);
        cfg.noise.partial_pos_quad = num(n, "noise", "partial_pos_quad", cfg.noise.partial_pos_quad);
        cfg.noise.mean_size_var = num(n, "noise", "mean_size_var", cfg.noise.mean_size_var);
        cfg.noise.init_bbox_var = num(n, "noise", "init_bbox_var", cfg.noise.init_bbox_var);
        cfg.noise.init_bbox_vel_var = num(n, "noise", "init_bbox_vel_var", cfg.noise.init_bbox_vel_var);
        cfg.noise.init_pos_var = num(n, "noise", "init_pos_var", cfg.noise.init_pos_var);
        cfg.noise.init_vel_var = num(n, "noise", "init_vel_var", cfg.noise.init_vel_var);
        cfg.noise.init_size_var = num(n, "noise", "init_size_var", cfg.noise.init_size_var);
    }

    if (j.contains("tracker")) {
        const json& t = j.at("tracker");
        reject_unknown(t,
                       {"w_h_min", "tau", "w_c", "gamma", "w_h_ol", "w_h_sh", "min_affinity",
                        "branch_center_px", "branch_ground_m", "branch_appearance", "t_extrap",
                        "n_prune", "w_spawn", "appearance_alpha", "confusion"},
                       "tracker");
        cfg.tracker.w_h_min = num(t, "tracker", "w_h_min", cfg.tracker.w_h_min);
        cfg.tracker.tau = num(t, "tracker", "tau", cfg.tracker.tau);
        cfg.tracker.w_c = num(t, "tracker", "w_c", cfg.tracker.w_c);
        cfg.tracker.gamma = num(t, "tracker", "gamma", cfg.tracker.gamma);
        cfg.tracker.w_h_ol = num(t, "tracker", "w_h_ol", cfg.tracker.w_h_ol);
        cfg.tracker.w_h_sh = num(t, "tracker", "w_h_sh", cfg.tracker.w_h_sh);
        cfg.tracker.min_affinity = num(t, "tracker", "min_affinity", cfg.tracker.min_affinity);
        cfg.tracker.branch_center_px = num(t, "tracker", "branch_center_px", cfg.tracker.branch_center_px);
        cfg.tracker.branch_ground_m = num(t, "tracker", "branch_ground_m", cfg.tracker.branch_ground_m);
        cfg.tracker.branch_appearance = num(t, "tracker", "branch_appearance", cfg.tracker.branch_appearance);
        cfg.tracker.t_extrap = integer(t, "tracker", "t_extrap", cfg.tracker.t_extrap);
        cfg.tracker.n_prune = integer(t, "tracker", "n_prune", cfg.tracker.n_prune);
        cfg.tracker.w_spawn = integer(t, "tracker", "w_spawn", cfg.tracker.w_spawn);
        cfg.tracker.appearance_alpha = num(t, "tracker", "appearance_alpha", cfg.tracker.appearance_alpha);
        if (t.contains("confusion")) {
            const json& m = t.at("confusion");
            if (!m.is_array() || m.size() != 3) fail("tracker.confusion", "must be a 3x3 matrix");
            for (int r = 0; r < 3; ++r) {
                if (!m.at(r).is_array() || m.at(r).size() != 3)
                    fail("tracker.confusion", "must be a 3x3 matrix");
                for (int c = 0; c < 3; ++c) cfg.tracker.confusion(r, c) = m.at(r).at(c).get<double>();
            }
        }
    }

    if (j.contains("size_stats")) {
        const json& s = j.at("size_stats");
        reject_unknown(s, {"car", "pedestrian", "cyclist"}, "size_stats");
        for (int c = 0; c < kNumCategories; ++c) {
            std::string name = category_name(static_cast<Category>(c));
            name[0] = static_cast<char>(std::tolower(name[0]));
            if (!s.contains(name)) continue;
            const json& e = s.at(name);
            reject_unknown(e, {"mean", "sigma"}, "size_stats." + name);
            if (e.contains("mean")) cfg.size_stats.mean[c] = vec3(e.at("mean"), "size_stats." + name + ".mean");
            if (e.contains("sigma")) {
                const Eigen::Vector3d sigma = vec3(e.at("sigma"), "size_stats." + name + ".sigma");
                cfg.size_stats.variance[c] = sigma.cwiseProduct(sigma);
            }
        }
    }

    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        reject_unknown(m, {"iou_threshold"}, "metrics");
        cfg.metrics_iou_threshold = num(m, "metrics", "iou_threshold", cfg.metrics_iou_threshold);
    }

    cfg.solver_branches = integer(j, "", "solver_branches", cfg.solver_branches);
    cfg.tracker.solver_branches = cfg.solver_branches;

    validate(cfg);
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

ScenarioSpec parse_scenario(const std::string& json_text) {
    const json j = parse_json(json_text, "scenario");
    reject_unknown(j,
                   {"duration", "fps", "seed", "camera", "ego", "objects", "detection_noise",
                    "proposal_noise", "no_flow"},
                   "");

    ScenarioSpec spec;
    spec.duration = integer(j, "", "duration", spec.duration);
    require(spec.duration >= 1, "duration", "must be at least 1");
    spec.fps = num(j, "", "fps", spec.fps);
    require(spec.fps > 0, "fps", "must be positive");
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("no_flow")) spec.no_flow = j.at("no_flow").get<bool>();

    if (j.contains("camera")) {
        const json& c = j.at("camera");
        reject_unknown(c, {"f", "u0", "v0", "width", "height", "height_above_ground"}, "camera");
        spec.camera.f = num(c, "camera", "f", spec.camera.f);
        spec.camera.u0 = num(c, "camera", "u0", spec.camera.u0);
        spec.camera.v0 = num(c, "camera", "v0", spec.camera.v0);
        spec.camera.width = num(c, "camera", "width", spec.camera.width);
        spec.camera.height = num(c, "camera", "height", spec.camera.height);
        spec.camera.height_above_ground =
            num(c, "camera", "height_above_ground", spec.camera.height_above_ground);
        require(spec.camera.f > 0, "camera.f", "must be positive");
        require(spec.camera.height_above_ground > 0, "camera.height_above_ground", "must be positive");
    }

    if (j.contains("ego")) {
        const json& e = j.at("ego");
        reject_unknown(e, {"motion", "speed", "yaw_rate"}, "ego");
        const std::string motion = e.contains("motion") ? e.at("motion").get<std::string>() : "static";
        if (motion == "static") {
            spec.ego.kind = EgoMotionSpec::Kind::kStatic;
        } else if (motion == "straight") {
            spec.ego.kind = EgoMotionSpec::Kind::kStraight;
        } else if (motion == "curve") {
            spec.ego.kind = EgoMotionSpec::Kind::kCurve;
        } else {
            fail("ego.motion", "must be one of static|straight|curve");
        }
        spec.ego.speed = num(e, "ego", "speed", spec.ego.speed);
        spec.ego.yaw_rate = num(e, "ego", "yaw_rate", spec.ego.yaw_rate);
    }

    if (j.contains("objects")) {
        const json& arr = j.at("objects");
        if (!arr.is_array()) fail("objects", "must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const json& o = arr.at(i);
            const std::string scope = "objects[" + std::to_string(i) + "]";
            reject_unknown(o, {"category", "position", "velocity", "yaw_rate", "size", "appearance"},
                           scope);
            SimObject obj;
            if (o.contains("category")) {
                const auto cat = category_from_name(o.at("category").get<std::string>());
                if (!cat) fail(scope + ".category", "must be car|pedestrian|cyclist");
                obj.category = *cat;
                obj.size3d = SizeStats::defaults().mean_of(obj.category);
            }
            if (o.contains("position")) {
                const json& p = o.at("position");
                if (!p.is_array() || p.size() != 2) fail(scope + ".position", "must be [x, z]");
                obj.position = {p.at(0).get<double>(), p.at(1).get<double>()};
            }
            if (o.contains("velocity")) {
                const json& p = o.at("velocity");
                if (!p.is_array() || p.size() != 2) fail(scope + ".velocity", "must be [vx, vz]");
                obj.velocity = {p.at(0).get<double>(), p.at(1).get<double>()};
            }
            obj.yaw_rate = num(o, scope, "yaw_rate", 0.0);
            if (o.contains("size")) obj.size3d = vec3(o.at("size"), scope + ".size");
            for (int d = 0; d < 3; ++d) require(obj.size3d[d] > 0, scope + ".size", "must be positive");
            if (o.contains("appearance")) {
                for (const auto& v : o.at("appearance")) obj.appearance.push_back(v.get<double>());
            }
            spec.objects.push_back(std::move(obj));
        }
    }

    if (j.contains("detection_noise")) {
        const json& d = j.at("detection_noise");
        reject_unknown(d,
                       {"bbox_center_sigma", "bbox_size_sigma", "miss_base", "miss_per_meter",
                        "fp_rate", "class_confusion"},
                       "detection_noise");
        auto& dn = spec.detection_noise;
        dn.bbox_center_sigma = num(d, "detection_noise", "bbox_center_sigma", dn.bbox_center_sigma);
        dn.bbox_size_sigma = num(d, "detection_noise", "bbox_size_sigma", dn.bbox_size_sigma);
        dn.miss_base = num(d, "detection_noise", "miss_base", dn.miss_base);
        dn.miss_per_meter = num(d, "detection_noise", "miss_per_meter", dn.miss_per_meter);
        dn.fp_rate = num(d, "detection_noise", "fp_rate", dn.fp_rate);
        dn.class_confusion = num(d, "detection_noise", "class_confusion", dn.class_confusion);
        require(dn.miss_base >= 0 && dn.miss_base <= 1, "detection_noise.miss_base", "must be in [0,1]");
        require(dn.class_confusion >= 0 && dn.class_confusion <= 1, "detection_noise.class_confusion",
                "must be in [0,1]");
        require(dn.fp_rate >= 0, "detection_noise.fp_rate", "must be nonnegative");
    }

    if (j.contains("proposal_noise")) {
        const json& p = j.at("proposal_noise");
        reject_unknown(p,
                       {"lateral_sigma", "depth_quad", "size_frac_sigma", "z_max",
                        "points_per_proposal", "velocity_sigma"},
                       "proposal_noise");
        auto& pn = spec.proposal_noise;
        pn.lateral_sigma = num(p, "proposal_noise", "lateral_sigma", pn.lateral_sigma);
        pn.depth_quad = num(p, "proposal_noise", "depth_quad", pn.depth_quad);
        pn.size_frac_sigma = num(p, "proposal_noise", "size_frac_sigma", pn.size_frac_sigma);
        pn.z_max = num(p, "proposal_noise", "z_max", pn.z_max);
        pn.points_per_proposal = integer(p, "proposal_noise", "points_per_proposal", pn.points_per_proposal);
        pn.velocity_sigma = num(p, "proposal_noise", "velocity_sigma", pn.velocity_sigma);
        require(pn.depth_quad >= 0, "proposal_noise.depth_quad", "must be nonnegative");
        require(pn.z_max > 0, "proposal_noise.z_max", "must be positive");
        require(pn.points_per_proposal >= 1, "proposal_noise.points_per_proposal", "must be at least 1");
    }

    return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("scenario: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

}  // namespace fusetrack
