#pragma once

/**
 * @file control.hpp
 * @brief x-axis crossing station keeping.
 *
 * The controller aims the EM-frame x velocity at the N-th downstream perilune
 * toward the reference value. Two solvers are provided: a minimum-norm Newton
 * iteration on the scalar residual, and a sequence of linearized minimum-norm
 * problems whose feasible set is a slab of half-width s * v_tol. Either can use
 * an unscented-transform mean of the predicted x velocity instead of the
 * point prediction.
 */

#include "nrhonav/core/state.hpp"
#include "nrhonav/dynamics/propagator.hpp"
#include "nrhonav/filters/filters.hpp"
#include "nrhonav/reference/reference_orbit.hpp"

#include <functional>
#include <string>

namespace nrhonav {

enum class ControlMethod { DC, SLMP, UtDc, UtSlmp };

const char* to_string(ControlMethod m);
ControlMethod control_method_from_string(const std::string& name);
bool uses_unscented(ControlMethod m);

struct ControllerConfig {
    ControlMethod method = ControlMethod::DC;
    int target_perilune = 7;      ///< N
    double vx_trig_ms = 10.0;
    double vx_tol_ms = 1.0;
    double safety = 0.9;          ///< SLMP only
    int max_iter = 10;
    double burn_ta_deg = 180.0;
    UtConfig ut;
    /// Propagate all sigma points to the central point's perilune epoch instead of their own event.
    bool ut_common_epoch = false;
    /// Search window for the N-th perilune; 0 selects (N + 1) * 7 days.
    double event_horizon_s = 0.0;

    [[nodiscard]] double horizon() const;
    void validate() const;
};

struct VxPrediction {
    double vx = 0.0;                                  ///< km/s
    Eigen::RowVector3d b = Eigen::RowVector3d::Zero();  ///< d vx / d u
    Epoch tf;
    StateVector state_f;
};

/// Propagates theta0 + [0; u] to the N-th perilune and returns the EM x velocity
/// there. With `with_stm` the sensitivity row of sxform * Phi[:, 3:6] is filled.
VxPrediction predict_vx_at_target(const Propagator& prop, const ControllerConfig& cfg, const StateVector& theta0,
                                  const Vec3& u, bool with_stm = true);

/// Weighted sigma-point mean of the predicted x velocity, with u applied to every point.
double ut_mean_vx(const Propagator& prop, const ControllerConfig& cfg, const FilterState& fs,
                  const Vec3& u = Vec3::Zero());

struct ManeuverResult {
    Vec3 u = Vec3::Zero();              ///< km/s, frame I
    int iterations = 0;                 ///< updates applied
    double predicted_violation_ms = 0.0;  ///< before any control
    double achieved_violation_ms = 0.0;   ///< nonlinear, after the last update
    bool triggered = false;
    bool converged = false;
};

bool evaluate_trigger(double predicted_violation_ms, const ControllerConfig& cfg);

/// Coefficients of the projection y - nu1 xi1 - nu2 xi2 onto {xi1'y <= eta1} ∩ {xi2'y <= eta2}.
struct HalfspaceProjection {
    double nu1 = 0.0;
    double nu2 = 0.0;
    int active_case = 0;  ///< 0 none, 1 both, 2 second only, 3 first only
};

HalfspaceProjection project_two_halfspaces(const Vec3& y, const Vec3& xi1, double eta1, const Vec3& xi2,
                                           double eta2);

/// Minimum-norm Newton update -b' F / (b b') for the scalar residual F.
Vec3 dc_step(const Eigen::RowVector3d& b, double F);

/// Minimum-norm u with |F + b u| <= tol_lin: the origin projected onto the slab.
Vec3 slmp_step(const Eigen::RowVector3d& b, double F, double tol_lin, int* active_case = nullptr);

ManeuverResult dc_maneuver(const Propagator& prop, const ControllerConfig& cfg, const StateVector& theta0,
                           const TargetSpec& target);
ManeuverResult slmp_maneuver(const Propagator& prop, const ControllerConfig& cfg, const StateVector& theta0,
                             const TargetSpec& target);

/// Trigger check followed by the configured solver. Only the estimate is used.
ManeuverResult compute_maneuver(const Propagator& prop, const ControllerConfig& cfg, const FilterState& estimate,
                                const TargetSpec& target);

/// Reference target of the n-th perilune downstream, n = 1..N.
using TargetLookup = std::function<TargetSpec(int n)>;

/**
 * As above, but when the uncontrolled arc has no N-th perilune (it leaves the
 * orbit first) the maneuver is warm-started by solving for perilunes 1, 2, ...
 * with the point predictor until the N-th one exists. The trigger then counts
 * as fired with an infinite predicted violation.
 */
ManeuverResult compute_maneuver(const Propagator& prop, const ControllerConfig& cfg, const FilterState& estimate,
                                const TargetLookup& targets);

}  // namespace nrhonav
