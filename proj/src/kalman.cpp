#include "fusetrack/kalman.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace fusetrack {

namespace {

constexpr double kMinExtent = 1e-3;  // px for the 2D box, m for the 3D size
constexpr double kPsdFloor = -1e-9;

// Indices into the state vector.
enum : int { kBX = 0, kBY = 1, kBW = 2, kBH = 3, kVBX = 4, kPX = 8, kVX = 11, kSW = 14, kSH = 15, kSL = 16 };

bool same_pose(const EgoPose& a, const EgoPose& b) {
    return a.rotation == b.rotation && a.translation == b.translation;
}

// Ego correction of the box footpoint, with its Jacobian w.r.t.
// (x2D, y2D, h2D) and the world position. Returns false on frustum exit.
struct EgoCorrection {
    double x = 0.0, y = 0.0;       // corrected box center
    Eigen::Matrix2d d_center;      // d(x,y)/d(x2D, y2D)
    Eigen::Vector2d d_height;      // d(x,y)/d(h2D)
    Eigen::Matrix<double, 2, 3> d_pos;  // d(x,y)/d(position)
};

bool ego_correct(const BBox2D& bbox, const Eigen::Vector3d& position,
                 const CameraIntrinsics& intr, const EgoPose& ego_prev, const EgoPose& ego_curr,
                 EgoCorrection& out) {
    if (same_pose(ego_prev, ego_curr)) {
        out.x = bbox.x;
        out.y = bbox.y;
        out.d_center = Eigen::Matrix2d::Identity();
        out.d_height.setZero();
        out.d_pos.setZero();
        return true;
    }

    const double d_prev = (ego_prev.rotation * position + ego_prev.translation).z();
    if (d_prev <= 0.0) return false;

    const Eigen::Vector2d fp = bbox.footpoint();
    const Eigen::Vector3d ray = pixel_ray(fp, intr);
    const Eigen::Matrix3d M = ego_curr.rotation * ego_prev.rotation.transpose();
    const Eigen::Vector3d m = ego_curr.translation - M * ego_prev.translation;
    const Eigen::Vector3d q = M * (d_prev * ray) + m;
    if (q.z() <= 0.0) return false;

    const double inv_z = 1.0 / q.z();
    out.x = intr.f * q.x() * inv_z + intr.u0;
    out.y = intr.f * q.y() * inv_z + intr.v0 - 0.5 * bbox.h;

    Eigen::Matrix<double, 2, 3> proj;  // d(projected pixel)/dq
    proj << intr.f * inv_z, 0.0, -intr.f * q.x() * inv_z * inv_z,
            0.0, intr.f * inv_z, -intr.f * q.y() * inv_z * inv_z;

    Eigen::Matrix<double, 3, 2> dq_dfp = (d_prev / intr.f) * M.leftCols<2>();
    const Eigen::Matrix<double, 2, 2> dfp = proj * dq_dfp;

    // d_prev depends on the position through the previous camera's z row.
    const Eigen::RowVector3d r3_prev = ego_prev.rotation.row(2);
    const Eigen::Matrix<double, 2, 3> dpos = (proj * (M * ray)) * r3_prev;

    // Footpoint u = x2D, v = y2D + h2D/2; the center shift keeps h fixed.
    out.d_center = dfp;
    out.d_height = 0.5 * dfp.col(1);
    out.d_height.y() -= 0.5;  // minus the half-height moved back to the center
    out.d_pos = dpos;
    return true;
}

}  // namespace

std::optional<Vec17> transition(const Vec17& x, double dt, const CameraIntrinsics& intr,
                                const EgoPose& ego_prev, const EgoPose& ego_curr,
                                const CouplingWeights& cw) {
    const Eigen::Vector3d p = x.segment<3>(kPX);
    const Eigen::Vector3d v = x.segment<3>(kVX);

    EgoCorrection ec;
    if (!ego_correct({x[kBX], x[kBY], x[kBW], x[kBH]}, p, intr, ego_prev, ego_curr, ec))
        return std::nullopt;

    const Eigen::Vector3d p_cam = ego_curr.rotation * p + ego_curr.translation;
    const double d_c = p_cam.z();
    if (d_c <= 0.0) return std::nullopt;
    const Eigen::Vector3d v_cam = ego_curr.rotation * v;

    const double wa = cw.w_a, wb = cw.w_b, f = intr.f;

    Vec17 out = x;
    out[kBX] = wa * (dt * x[kVBX + 0] + ec.x) + wb * ((f / d_c) * (dt * v_cam.x() + p_cam.x()) + intr.u0);
    out[kBY] = wa * (dt * x[kVBX + 1] + ec.y) + wb * ((f / d_c) * (dt * v_cam.y() + p_cam.y()) + intr.v0);
    out[kBW] = x[kBW] + dt * x[kVBX + 2];
    out[kBH] = wa * (dt * x[kVBX + 3] + x[kBH]) + wb * (f / d_c) * x[kSH];
    // box rates, velocity, w3D, l3D carry over unchanged
    out.segment<3>(kPX) = p + dt * v;
    out[kSH] = wb * (d_c / f) * x[kBH] + wa * x[kSH];
    return out;
}

std::optional<Mat17> transition_jacobian(const Vec17& x, double dt, const CameraIntrinsics& intr,
                                         const EgoPose& ego_prev, const EgoPose& ego_curr,
                                         const CouplingWeights& cw) {
    const Eigen::Vector3d p = x.segment<3>(kPX);
    const Eigen::Vector3d v = x.segment<3>(kVX);

    EgoCorrection ec;
    if (!ego_correct({x[kBX], x[kBY], x[kBW], x[kBH]}, p, intr, ego_prev, ego_curr, ec))
        return std::nullopt;

    const Eigen::Vector3d p_cam = ego_curr.rotation * p + ego_curr.translation;
    const double d_c = p_cam.z();
    if (d_c <= 0.0) return std::nullopt;
    const Eigen::Vector3d v_cam = ego_curr.rotation * v;

    const double wa = cw.w_a, wb = cw.w_b, f = intr.f;
    const Eigen::RowVector3d r1 = ego_curr.rotation.row(0);
    const Eigen::RowVector3d r2 = ego_curr.rotation.row(1);
    const Eigen::RowVector3d r3 = ego_curr.rotation.row(2);

    Mat17 J = Mat17::Identity();

    // x2D row
    J(kBX, kBX) = wa * ec.d_center(0, 0);
    J(kBX, kBY) = wa * ec.d_center(0, 1);
    J(kBX, kBH) = wa * ec.d_height(0);
    J(kBX, kVBX + 0) = wa * dt;
    J.block<1, 3>(kBX, kPX) =
        wa * ec.d_pos.row(0) +
        wb * f * (r1 / d_c - ((dt * v_cam.x() + p_cam.x()) / (d_c * d_c)) * r3);
    J.block<1, 3>(kBX, kVX) = wb * (f / d_c) * dt * r1;

    // y2D row
    J(kBY, kBX) = wa * ec.d_center(1, 0);
    J(kBY, kBY) = wa * ec.d_center(1, 1);
    J(kBY, kBH) = wa * ec.d_height(1);
    J(kBY, kVBX + 1) = wa * dt;
    J.block<1, 3>(kBY, kPX) =
        wa * ec.d_pos.row(1) +
        wb * f * (r2 / d_c - ((dt * v_cam.y() + p_cam.y()) / (d_c * d_c)) * r3);
    J.block<1, 3>(kBY, kVX) = wb * (f / d_c) * dt * r2;

    // w2D row
    J(kBW, kVBX + 2) = dt;

    // h2D row
    J(kBH, kBH) = wa;
    J(kBH, kVBX + 3) = wa * dt;
    J(kBH, kSH) = wb * f / d_c;
    J.block<1, 3>(kBH, kPX) = -wb * (f * x[kSH] / (d_c * d_c)) * r3;

    // position rows
    for (int i = 0; i < 3; ++i) J(kPX + i, kVX + i) = dt;

    // h3D row
    J(kSH, kSH) = wa;
    J(kSH, kBH) = wb * d_c / f;
    J.block<1, 3>(kSH, kPX) = wb * (x[kBH] / f) * r3;

    return J;
}

Mat17 process_noise(double dt, const NoiseConfig& noise) {
    Mat17 Q = Mat17::Zero();
    const double d3 = dt * dt * dt / 3.0;
    const double d2 = dt * dt / 2.0;
    for (int i = 0; i < 4; ++i) {
        Q(i, i) = noise.process_bbox * d3;
        Q(i, i + 4) = Q(i + 4, i) = noise.process_bbox * d2;
        Q(i + 4, i + 4) = noise.process_bbox * dt;
    }
    for (int i = 0; i < 3; ++i) {
        Q(kPX + i, kPX + i) = noise.process_pos * d3;
        Q(kPX + i, kVX + i) = Q(kVX + i, kPX + i) = noise.process_pos * d2;
        Q(kVX + i, kVX + i) = noise.process_pos * dt;
    }
    for (int i = 0; i < 3; ++i) Q(kSW + i, kSW + i) = noise.process_size * dt;
    return Q;
}

namespace {

// P' = J P J^T + Q with plain accumulation loops. Keeps the decoupled limit
// arithmetically identical to a standalone filter over the same sub-blocks.
Mat17 propagate_cov(const Mat17& P, const Mat17& J, const Mat17& Q) {
    Mat17 T;
    for (int i = 0; i < 17; ++i) {
        for (int j = 0; j < 17; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 17; ++k) acc += J(i, k) * P(k, j);
            T(i, j) = acc;
        }
    }
    Mat17 out;
    for (int i = 0; i < 17; ++i) {
        for (int j = 0; j < 17; ++j) {
            double acc = Q(i, j);
            for (int k = 0; k < 17; ++k) acc += T(i, k) * J(j, k);
            out(i, j) = acc;
        }
    }
    return out;
}

void symmetrize(Mat17& P) {
    for (int i = 0; i < 17; ++i) {
        for (int j = i + 1; j < 17; ++j) {
            const double m = 0.5 * (P(i, j) + P(j, i));
            P(i, j) = m;
            P(j, i) = m;
        }
    }
}

void clamp_extents(Vec17& x) {
    x[kBW] = std::max(x[kBW], kMinExtent);
    x[kBH] = std::max(x[kBH], kMinExtent);
    for (int i = 0; i < 3; ++i) x[kSW + i] = std::max(x[kSW + i], kMinExtent);
}

// One scalar measurement update of component `idx` with variance r.
void scalar_update(CoupledState& s, int idx, double z, double r) {
    const double S = s.covariance(idx, idx) + r;
    double K[17];
    for (int a = 0; a < 17; ++a) K[a] = s.covariance(a, idx) / S;
    const double innovation = z - s.mean[idx];
    for (int a = 0; a < 17; ++a) s.mean[a] += K[a] * innovation;
    double row[17];
    for (int b = 0; b < 17; ++b) row[b] = s.covariance(idx, b);
    for (int a = 0; a < 17; ++a) {
        for (int b = 0; b < 17; ++b) s.covariance(a, b) -= K[a] * row[b];
    }
}

void finish_update(CoupledState& s) {
    symmetrize(s.covariance);
    Eigen::SelfAdjointEigenSolver<Mat17> eig(s.covariance);
    if (eig.eigenvalues().minCoeff() < kPsdFloor) {
        const Vec17 clamped = eig.eigenvalues().cwiseMax(0.0);
        s.covariance = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
        symmetrize(s.covariance);
        s.psd_clamped = true;
    }
    clamp_extents(s.mean);
}

}  // namespace

std::optional<CoupledState> init_state(const Observation& obs, const FrameContext& ctx,
                                       const SizeStats& stats, const NoiseConfig& noise) {
    CoupledState s;
    s.set_bbox(obs.detection.bbox);
    if (obs.fused()) {
        s.mean.segment<3>(kPX) = obs.proposal->position;
        if (obs.proposal->velocity) s.mean.segment<3>(kVX) = *obs.proposal->velocity;
        s.mean.segment<3>(kSW) = obs.proposal->size3d;
    } else {
        const auto ground = backproject_to_ground(obs.detection.bbox.footpoint(), ctx.intrinsics,
                                                  ctx.ego, ctx.plane);
        if (!ground) return std::nullopt;
        s.mean.segment<3>(kPX) = *ground;
        s.mean.segment<3>(kSW) = stats.mean_of(obs.detection.category);
    }

    s.covariance.setZero();
    for (int i = 0; i < 4; ++i) {
        s.covariance(i, i) = noise.init_bbox_var;
        s.covariance(i + 4, i + 4) = noise.init_bbox_vel_var;
    }
    for (int i = 0; i < 3; ++i) {
        s.covariance(kPX + i, kPX + i) = noise.init_pos_var;
        s.covariance(kVX + i, kVX + i) = noise.init_vel_var;
        s.covariance(kSW + i, kSW + i) = noise.init_size_var;
    }
    clamp_extents(s.mean);
    return s;
}

CoupledState init_state_bbox_only(const Detection2D& det, const SizeStats& stats,
                                  const NoiseConfig& noise) {
    CoupledState s;
    s.set_bbox(det.bbox);
    // Nominal in-frustum position; never measured, never coupled (w_b = 0 in
    // the pure-2D variant), but keeps the prediction depth check positive.
    s.mean[kPX + 2] = 20.0;
    s.mean.segment<3>(kSW) = stats.mean_of(det.category);
    s.covariance.setZero();
    for (int i = 0; i < 4; ++i) {
        s.covariance(i, i) = noise.init_bbox_var;
        s.covariance(i + 4, i + 4) = noise.init_bbox_vel_var;
    }
    for (int i = 0; i < 3; ++i) {
        s.covariance(kPX + i, kPX + i) = 1e6;
        s.covariance(kVX + i, kVX + i) = 1e6;
        s.covariance(kSW + i, kSW + i) = noise.init_size_var;
    }
    clamp_extents(s.mean);
    return s;
}

std::optional<CoupledState> predict(const CoupledState& state, double dt,
                                    const CameraIntrinsics& intr, const EgoPose& ego_prev,
                                    const EgoPose& ego_curr, const CouplingWeights& cw,
                                    const NoiseConfig& noise) {
    if (dt <= 0.0) throw std::invalid_argument("predict: dt must be positive");
    const auto mean = transition(state.mean, dt, intr, ego_prev, ego_curr, cw);
    if (!mean) return std::nullopt;
    const auto J = transition_jacobian(state.mean, dt, intr, ego_prev, ego_curr, cw);

    CoupledState out = state;
    out.mean = *mean;
    out.covariance = propagate_cov(state.covariance, *J, process_noise(dt, noise));
    symmetrize(out.covariance);
    clamp_extents(out.mean);
    return out;
}

CoupledState update_fused(const CoupledState& state, const Observation& obs,
                          const NoiseConfig& noise) {
    CoupledState s = state;
    const BBox2D& b = obs.detection.bbox;
    const double zb[4] = {b.x, b.y, b.w, b.h};
    for (int i = 0; i < 4; ++i) scalar_update(s, i, zb[i], noise.meas_bbox_var);
    const Proposal3D& prop = *obs.proposal;
    for (int i = 0; i < 3; ++i) scalar_update(s, kPX + i, prop.position[i], noise.meas_pos_var);
    if (prop.velocity) {
        for (int i = 0; i < 3; ++i) scalar_update(s, kVX + i, (*prop.velocity)[i], noise.meas_vel_var);
    }
    for (int i = 0; i < 3; ++i) scalar_update(s, kSW + i, prop.size3d[i], noise.meas_size_var);
    finish_update(s);
    return s;
}

CoupledState update_bbox_only(const CoupledState& state, const Detection2D& det,
                              const NoiseConfig& noise) {
    CoupledState s = state;
    const double zb[4] = {det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h};
    for (int i = 0; i < 4; ++i) scalar_update(s, i, zb[i], noise.meas_bbox_var);
    finish_update(s);
    return s;
}

CoupledState update_partial(const CoupledState& state, const Observation& obs,
                            const FrameContext& ctx, const SizeStats& stats,
                            const NoiseConfig& noise) {
    CoupledState s = state;
    const BBox2D& b = obs.detection.bbox;
    const double zb[4] = {b.x, b.y, b.w, b.h};
    for (int i = 0; i < 4; ++i) scalar_update(s, i, zb[i], noise.meas_bbox_var);

    const auto ground =
        backproject_to_ground(b.footpoint(), ctx.intrinsics, ctx.ego, ctx.plane);
    if (ground) {
        const double depth = ctx.ego.to_camera(*ground).z();
        const double sigma = noise.partial_pos_sigma0 + noise.partial_pos_quad * depth * depth;
        const double var = sigma * sigma;
        for (int i = 0; i < 3; ++i) scalar_update(s, kPX + i, (*ground)[i], var);
        const Eigen::Vector3d& mean_size = stats.mean_of(obs.detection.category);
        for (int i = 0; i < 3; ++i) scalar_update(s, kSW + i, mean_size[i], noise.mean_size_var);
    }
    finish_update(s);
    return s;
}

}  // namespace fusetrack
