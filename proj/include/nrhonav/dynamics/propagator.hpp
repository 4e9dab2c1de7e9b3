#pragma once

/**
 * @file propagator.hpp
 * @brief State and STM propagation, plus event location along a trajectory.
 *
 * Public quantities are in km, km/s and seconds. Internally the integrator
 * runs in canonical units (3000 km, 2346.71 s) with time measured from the
 * start epoch of each call.
 */

#include "nrhonav/core/state.hpp"
#include "nrhonav/dynamics/dop853.hpp"
#include "nrhonav/dynamics/force_model.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace nrhonav {

using Stm = Mat6;

enum class EventKind { Perilune, Apolune, TrueAnomaly, EmXzPlane };
enum class EventDirection { Increasing, Decreasing, Any };

struct EventSpec {
    EventKind kind = EventKind::Perilune;
    EventDirection direction = EventDirection::Increasing;
    int count = 1;
    double true_anomaly_deg = 0.0;  ///< only for EventKind::TrueAnomaly

    static EventSpec perilune(int n = 1) { return {EventKind::Perilune, EventDirection::Increasing, n}; }
    static EventSpec apolune(int n = 1) { return {EventKind::Apolune, EventDirection::Decreasing, n}; }
    static EventSpec true_anomaly(double deg, int n = 1) {
        return {EventKind::TrueAnomaly, EventDirection::Increasing, n, deg};
    }
    static EventSpec xz_plane(EventDirection d = EventDirection::Any, int n = 1) {
        return {EventKind::EmXzPlane, d, n};
    }
};

struct EventResult {
    StateVector state;
    std::optional<Stm> stm;  ///< set by find_event_with_stm
};

/// Sampled trajectory node with the derivative needed for Hermite interpolation.
struct TrajectoryNode {
    Epoch epoch;
    Vec3 r = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Vec3 a = Vec3::Zero();
};

class Propagator {
public:
    Propagator(std::shared_ptr<const DynamicsModel> model, IntegratorConfig config = {});

    [[nodiscard]] const DynamicsModel& model() const { return *model_; }
    [[nodiscard]] std::shared_ptr<const DynamicsModel> model_ptr() const { return model_; }
    [[nodiscard]] const IntegratorConfig& config() const { return config_; }

    /// Propagates to t1 (forward or backward). When `nodes` is given, every
    /// accepted integrator step is appended (the start node included).
    [[nodiscard]] StateVector propagate(const StateVector& s0, Epoch t1,
                                        std::vector<TrajectoryNode>* nodes = nullptr) const;

    /// Propagates the state and the 6x6 state transition matrix Phi(t1, t0).
    [[nodiscard]] std::pair<StateVector, Stm> propagate_with_stm(const StateVector& s0, Epoch t1) const;

    /// Same, starting from an existing Phi(t0, tr) so the result is Phi(t1, tr).
    [[nodiscard]] std::pair<StateVector, Stm> propagate_with_stm(const StateVector& s0, const Stm& phi0,
                                                                 Epoch t1) const;

    /// Locates the `count`-th occurrence of an event within `horizon` seconds.
    [[nodiscard]] EventResult find_event(const StateVector& s0, const EventSpec& spec,
                                         double horizon_s) const;
    [[nodiscard]] EventResult find_event_with_stm(const StateVector& s0, const EventSpec& spec,
                                                  double horizon_s) const;

    /// Integrates while calling `on_step(prev, next)` after each accepted step;
    /// returning false stops. Returns the last state reached.
    StateVector propagate_observed(
        const StateVector& s0, Epoch t1,
        const std::function<bool(const StateVector&, const StateVector&)>& on_step) const;

    /// Event function value in a dimensionless form (used by tests and callers).
    [[nodiscard]] double event_function(const EventSpec& spec, const StateVector& s) const;

private:
    template <int N>
    EventResult find_event_impl(const StateVector& s0, const EventSpec& spec, double horizon_s) const;

    std::shared_ptr<const DynamicsModel> model_;
    IntegratorConfig config_;
};

// Free-function forms.
StateVector propagate(const Propagator& p, const StateVector& s0, Epoch t1);
std::pair<StateVector, Stm> propagate_with_stm(const Propagator& p, const StateVector& s0, Epoch t1);
EventResult find_event(const Propagator& p, const StateVector& s0, const EventSpec& spec, double horizon_s);

/// Rotating-frame Jacobi-like constant in canonical units, valid for a
/// circular-analytic model (Earth on a circle, synchronous axisymmetric Moon).
double jacobi_constant(const DynamicsModel& model, const StateVector& s);

/// Converts an inertial state to the Earth-Moon rotating frame (position, velocity).
Vec6 to_em(const EphemerisProvider& eph, const StateVector& s);
StateVector from_em(const EphemerisProvider& eph, Epoch t, const Vec6& em);

}  // namespace nrhonav
