#include "nrhonav/control/control.hpp"

#include "nrhonav/core/error.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace nrhonav {

const char* to_string(ControlMethod m) {
    switch (m) {
        case ControlMethod::DC: return "DC";
        case ControlMethod::SLMP: return "SLMP";
        case ControlMethod::UtDc: return "UT-DC";
        case ControlMethod::UtSlmp: return "UT-SLMP";
    }
    return "?";
}

ControlMethod control_method_from_string(const std::string& name) {
    if (name == "DC") return ControlMethod::DC;
    if (name == "SLMP") return ControlMethod::SLMP;
    if (name == "UT-DC") return ControlMethod::UtDc;
    if (name == "UT-SLMP") return ControlMethod::UtSlmp;
    throw Error(ErrorCode::ConfigError, "unknown control method '" + name + "'");
}

bool uses_unscented(ControlMethod m) { return m == ControlMethod::UtDc || m == ControlMethod::UtSlmp; }

double ControllerConfig::horizon() const {
    return event_horizon_s > 0.0 ? event_horizon_s : (target_perilune + 1) * 7.0 * 86400.0;
}

void ControllerConfig::validate() const {
    if (target_perilune < 1) throw Error(ErrorCode::ConfigError, "targeted perilune index must be >= 1");
    if (!(vx_tol_ms > 0.0) || !(vx_trig_ms >= vx_tol_ms)) {
        throw Error(ErrorCode::ConfigError, "need 0 < v_x,tol <= v_x,trig");
    }
    if (!(safety > 0.0 && safety < 1.0)) throw Error(ErrorCode::ConfigError, "safety factor must be in (0, 1)");
    if (max_iter < 1) throw Error(ErrorCode::ConfigError, "max_iter must be >= 1");
    ut.validate();
}

VxPrediction predict_vx_at_target(const Propagator& prop, const ControllerConfig& cfg, const StateVector& theta0,
                                  const Vec3& u, bool with_stm) {
    const StateVector s0(theta0.epoch, theta0.r, theta0.v + u);
    const EventSpec spec = EventSpec::perilune(cfg.target_perilune);
    const EventResult ev =
        with_stm ? prop.find_event_with_stm(s0, spec, cfg.horizon()) : prop.find_event(s0, spec, cfg.horizon());
    const Mat6 T = prop.model().ephemeris().sxform_inertial_to_em(ev.state.epoch);
    VxPrediction out;
    out.tf = ev.state.epoch;
    out.state_f = ev.state;
    out.vx = (T * ev.state.vector())[3];
    if (with_stm && ev.stm) {
        // The perilune time moves with u (r.v = 0 at the event), which adds
        // d(vx)/dt * dt_f/du to the plain STM row.
        const StateVector& xf = ev.state;
        const Eigen::Matrix<double, 6, 3> dxf = ev.stm->rightCols<3>();
        const Vec3 a = prop.model().acceleration(xf.epoch, xf.r);
        const double gdot = xf.v.squaredNorm() + xf.r.dot(a);
        const Eigen::RowVector3d dg = xf.v.transpose() * dxf.topRows<3>() + xf.r.transpose() * dxf.bottomRows<3>();
        const EphemerisProvider& eph = prop.model().ephemeris();
        constexpr double h = 10.0;
        const Mat6 Tdot = (eph.sxform_inertial_to_em(xf.epoch + h) - eph.sxform_inertial_to_em(xf.epoch - h)) / (2.0 * h);
        Vec6 xdot;
        xdot << xf.v, a;
        const double vxdot = (Tdot * xf.vector() + T * xdot)[3];
        out.b = (T * dxf).row(3) - (vxdot / gdot) * dg;
    }
    return out;
}

namespace {

double vx_at_epoch(const Propagator& prop, const StateVector& s0, Epoch tf) {
    const StateVector sf = prop.propagate(s0, tf);
    return (prop.model().ephemeris().sxform_inertial_to_em(tf) * sf.vector())[3];
}

/// UT mean of vx together with the central point's sensitivity row.
VxPrediction ut_prediction(const Propagator& prop, const ControllerConfig& cfg, const FilterState& fs,
                           const Vec3& u) {
    const auto pts = sigma_points(fs, cfg.ut);
    const auto wm = cfg.ut.mean_weights();
    VxPrediction central = predict_vx_at_target(prop, cfg, pts[0], u, true);
    double mean = wm[0] * central.vx;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const StateVector s(pts[i].epoch, pts[i].r, pts[i].v + u);
        const double vx = cfg.ut_common_epoch ? vx_at_epoch(prop, s, central.tf)
                                              : predict_vx_at_target(prop, cfg, s, Vec3::Zero(), false).vx;
        mean += wm[i] * vx;
    }
    central.vx = mean;
    return central;
}

}  // namespace

double ut_mean_vx(const Propagator& prop, const ControllerConfig& cfg, const FilterState& fs, const Vec3& u) {
    return ut_prediction(prop, cfg, fs, u).vx;
}

bool evaluate_trigger(double predicted_violation_ms, const ControllerConfig& cfg) {
    return predicted_violation_ms >= cfg.vx_trig_ms;
}

HalfspaceProjection project_two_halfspaces(const Vec3& y, const Vec3& xi1, double eta1, const Vec3& xi2,
                                           double eta2) {
    const double a1 = y.dot(xi1) - eta1;
    const double a2 = y.dot(xi2) - eta2;
    const double n1 = xi1.squaredNorm();
    const double n2 = xi2.squaredNorm();
    const double c = xi1.dot(xi2);
    const double det = n1 * n2 - c * c;

    HalfspaceProjection p;
    if (a1 <= 0.0 && a2 <= 0.0) return p;
    // Both constraints active is only possible for non-parallel normals.
    if (det > 1e-12 * n1 * n2 && n2 * a1 > c * a2 && n1 * a2 > c * a1) {
        p.nu1 = (n2 * a1 - c * a2) / det;
        p.nu2 = (n1 * a2 - c * a1) / det;
        p.active_case = 1;
        return p;
    }
    if (a2 > 0.0 && n2 * a1 <= c * a2) {
        p.nu2 = a2 / n2;
        p.active_case = 2;
        return p;
    }
    p.nu1 = a1 / n1;
    p.active_case = 3;
    return p;
}

Vec3 dc_step(const Eigen::RowVector3d& b, double F) {
    const double bb = b.squaredNorm();
    if (!(bb > 1e-28)) throw Error(ErrorCode::DegenerateRow, "control has no influence on the target");
    return -b.transpose() * (F / bb);
}

Vec3 slmp_step(const Eigen::RowVector3d& b, double F, double tol_lin, int* active_case) {
    if (b.norm() < 1e-14) throw Error(ErrorCode::DegenerateRow, "control has no influence on the target");
    const Vec3 xi1 = b.transpose();
    const Vec3 xi2 = -xi1;
    const HalfspaceProjection p = project_two_halfspaces(Vec3::Zero(), xi1, tol_lin - F, xi2, tol_lin + F);
    if (active_case) *active_case = p.active_case;
    return -p.nu1 * xi1 - p.nu2 * xi2;
}

namespace {

using Predictor = std::function<VxPrediction(const Vec3&)>;

constexpr int kMaxHalvings = 8;

/// Accepts the first of u + step, u + step/2, ... whose violation is smaller
/// than the current one. Arcs that leave the orbit count as rejections.
bool backtrack(const Predictor& predict, const TargetSpec& target, Vec3& u, const Vec3& step, VxPrediction& pred) {
    const double f0 = std::abs(pred.vx - target.vx_em);
    double lambda = 1.0;
    for (int k = 0; k < kMaxHalvings; ++k, lambda *= 0.5) {
        try {
            VxPrediction trial = predict(u + lambda * step);
            if (std::abs(trial.vx - target.vx_em) < f0) {
                u += lambda * step;
                pred = std::move(trial);
                return true;
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EventNotFound) throw;
        }
    }
    return false;
}

ManeuverResult run_dc(const Predictor& predict, const ControllerConfig& cfg, const TargetSpec& target,
                      VxPrediction first, const Vec3& u0 = Vec3::Zero()) {
    ManeuverResult res;
    res.triggered = true;
    const double tol = cfg.vx_tol_ms * 1e-3;
    VxPrediction pred = std::move(first);
    Vec3 u = u0;
    for (;;) {
        const double F = pred.vx - target.vx_em;
        res.achieved_violation_ms = std::abs(F) * 1e3;
        if (std::abs(F) <= tol) {
            res.converged = true;
            break;
        }
        if (res.iterations >= cfg.max_iter) break;
        const Vec3 step = dc_step(pred.b, F);
        ++res.iterations;
        if (!backtrack(predict, target, u, step, pred)) break;
    }
    res.u = u;
    return res;
}

ManeuverResult run_slmp(const Predictor& predict, const ControllerConfig& cfg, const TargetSpec& target,
                        VxPrediction first, const Vec3& u0 = Vec3::Zero()) {
    ManeuverResult res;
    res.triggered = true;
    const double tol = cfg.vx_tol_ms * 1e-3;
    const double tol_lin = cfg.safety * tol;
    VxPrediction pred = std::move(first);
    Vec3 ubar = u0;
    for (;;) {
        const double F = pred.vx - target.vx_em;
        res.achieved_violation_ms = std::abs(F) * 1e3;
        if (std::abs(F) <= tol) {
            res.converged = true;
            break;
        }
        if (res.iterations >= cfg.max_iter) break;
        const Vec3 step = slmp_step(pred.b, F, tol_lin);
        ++res.iterations;
        if (!backtrack(predict, target, ubar, step, pred)) break;
    }
    res.u = ubar;
    return res;
}

}  // namespace

ManeuverResult dc_maneuver(const Propagator& prop, const ControllerConfig& cfg, const StateVector& theta0,
                           const TargetSpec& target) {
    const Predictor f = [&](const Vec3& u) { return predict_vx_at_target(prop, cfg, theta0, u); };
    return run_dc(f, cfg, target, f(Vec3::Zero()));
}

ManeuverResult slmp_maneuver(const Propagator& prop, const ControllerConfig& cfg, const StateVector& theta0,
                             const TargetSpec& target) {
    const Predictor f = [&](const Vec3& u) { return predict_vx_at_target(prop, cfg, theta0, u); };
    return run_slmp(f, cfg, target, f(Vec3::Zero()));
}

namespace {

Predictor make_predictor(const Propagator& prop, const ControllerConfig& cfg, const FilterState& estimate) {
    if (uses_unscented(cfg.method)) {
        return [&prop, &cfg, &estimate](const Vec3& u) { return ut_prediction(prop, cfg, estimate, u); };
    }
    return [&prop, &cfg, &estimate](const Vec3& u) { return predict_vx_at_target(prop, cfg, estimate.mean, u); };
}

ManeuverResult solve(const Predictor& f, const ControllerConfig& cfg, const TargetSpec& target, VxPrediction first,
                     const Vec3& u0) {
    const bool slmp = cfg.method == ControlMethod::SLMP || cfg.method == ControlMethod::UtSlmp;
    return slmp ? run_slmp(f, cfg, target, std::move(first), u0) : run_dc(f, cfg, target, std::move(first), u0);
}

}  // namespace

ManeuverResult compute_maneuver(const Propagator& prop, const ControllerConfig& cfg, const FilterState& estimate,
                                const TargetSpec& target) {
    const Predictor f = make_predictor(prop, cfg, estimate);
    VxPrediction first = f(Vec3::Zero());
    const double violation = std::abs(first.vx - target.vx_em) * 1e3;

    ManeuverResult res;
    if (!evaluate_trigger(violation, cfg)) {
        res.predicted_violation_ms = violation;
        res.achieved_violation_ms = violation;
        res.converged = true;
        return res;
    }
    res = solve(f, cfg, target, std::move(first), Vec3::Zero());
    res.predicted_violation_ms = violation;
    return res;
}

ManeuverResult compute_maneuver(const Propagator& prop, const ControllerConfig& cfg, const FilterState& estimate,
                                const TargetLookup& targets) {
    const int N = cfg.target_perilune;
    const TargetSpec target = targets(N);
    try {
        return compute_maneuver(prop, cfg, estimate, target);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EventNotFound) throw;
    }

    // Continuation over the perilune index with the point predictor.
    Vec3 u = Vec3::Zero();
    int extra_iterations = 0;
    for (int n = 1; n < N; ++n) {
        ControllerConfig sub = cfg;
        sub.target_perilune = n;
        sub.method = ControlMethod::DC;
        const Predictor fn = [&](const Vec3& du) { return predict_vx_at_target(prop, sub, estimate.mean, du); };
        const ManeuverResult r = run_dc(fn, sub, targets(n), fn(u), u);
        u = r.u;
        extra_iterations += r.iterations;
        try {
            (void)predict_vx_at_target(prop, cfg, estimate.mean, u, false);
            break;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EventNotFound || n + 1 == N) throw;
        }
    }
    const Predictor f = make_predictor(prop, cfg, estimate);
    ManeuverResult res = solve(f, cfg, target, f(u), u);
    res.iterations += extra_iterations;
    res.predicted_violation_ms = std::numeric_limits<double>::infinity();
    return res;
}

}  // namespace nrhonav
