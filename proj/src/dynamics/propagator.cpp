#include "nrhonav/dynamics/propagator.hpp"

#include "nrhonav/core/constants.hpp"
#include "nrhonav/core/error.hpp"
#include "nrhonav/frames/anomaly.hpp"

#include <cmath>

namespace nrhonav {

namespace {

constexpr double LU = constants::kLengthUnitKm;
constexpr double TU = constants::kTimeUnitS;
constexpr double VU = constants::kVelocityUnitKmS;
constexpr double AU = constants::kAccelUnitKmS2;

constexpr double kSignificant = 1e-9;
constexpr double kEventTimeTolS = 1e-6;
constexpr double kStartGuardS = 1e-3;

using X6 = Eigen::Matrix<double, 6, 1>;
using X42 = Eigen::Matrix<double, 42, 1>;

template <int N>
using XN = Eigen::Matrix<double, N, 1>;

/// Right-hand side in canonical units with time measured from `t0`.
template <int N>
struct CanonicalRhs {
    const DynamicsModel* model;
    Epoch t0;

    void operator()(double tc, const XN<N>& x, XN<N>& dx) const {
        const Epoch t = t0 + tc * TU;
        const Vec3 r = x.template head<3>() * LU;
        const ForceEnvironment env = model->environment(t);
        dx.template head<3>() = x.template segment<3>(3);
        dx.template segment<3>(3) = model->acceleration(env, r) / AU;
        if constexpr (N == 42) {
            const Mat3 g = model->gradient(env, r) * (TU * TU);
            Eigen::Map<const Eigen::Matrix<double, 6, 6>> phi(x.data() + 6);
            Eigen::Map<Eigen::Matrix<double, 6, 6>> dphi(dx.data() + 6);
            dphi.template topRows<3>() = phi.template bottomRows<3>();
            dphi.template bottomRows<3>().noalias() = g * phi.template topRows<3>();
        }
    }
};

template <int N>
XN<N> to_canonical(const StateVector& s, const Stm* phi = nullptr) {
    XN<N> x;
    x.template head<3>() = s.r / LU;
    x.template segment<3>(3) = s.v / VU;
    if constexpr (N == 42) {
        // Phi in canonical units: D^-1 Phi D with D = diag(LU, LU, LU, VU, VU, VU)
        Eigen::Map<Eigen::Matrix<double, 6, 6>> m(x.data() + 6);
        if (phi) {
            Vec6 d;
            d << LU, LU, LU, VU, VU, VU;
            m = d.cwiseInverse().asDiagonal() * (*phi) * d.asDiagonal();
        } else {
            m.setIdentity();
        }
    }
    return x;
}

template <int N>
StateVector from_canonical(Epoch t0, double tc, const XN<N>& x) {
    return StateVector(t0 + tc * TU, Vec3(x.template head<3>() * LU), Vec3(x.template segment<3>(3) * VU));
}

template <int N>
Stm stm_from_canonical(const XN<N>& x) {
    Eigen::Map<const Eigen::Matrix<double, 6, 6>> m(x.data() + 6);
    Vec6 d;
    d << LU, LU, LU, VU, VU, VU;
    return d.asDiagonal() * m * d.cwiseInverse().asDiagonal();
}

IntegratorConfig single_step_config(const IntegratorConfig& base, double dt) {
    IntegratorConfig c = base;
    c.initial_step = std::min(std::abs(dt), base.max_step);
    return c;
}

}  // namespace

Propagator::Propagator(std::shared_ptr<const DynamicsModel> model, IntegratorConfig config)
    : model_(std::move(model)), config_(config) {
    if (!model_) throw Error(ErrorCode::InvalidArgument, "propagator needs a dynamics model");
    model_->validate();
    config_.validate();
}

StateVector Propagator::propagate(const StateVector& s0, Epoch t1, std::vector<TrajectoryNode>* nodes) const {
    if (t1 == s0.epoch) {
        if (nodes) {
            nodes->push_back({s0.epoch, s0.r, s0.v, model_->acceleration(s0.epoch, s0.r)});
        }
        return s0;
    }
    CanonicalRhs<6> rhs{model_.get(), s0.epoch};
    X6 x = to_canonical<6>(s0);
    Dop853<6> integ(config_);
    const double tc1 = (t1 - s0.epoch) / TU;
    bool first = true;
    auto obs = [&](double ta, const X6& xa, const X6& fa, double tb, const X6& xb, const X6& fb) {
        if (!nodes) return true;
        if (first) {
            nodes->push_back({s0.epoch + ta * TU, xa.head<3>() * LU, xa.tail<3>() * VU, fa.tail<3>() * AU});
            first = false;
        }
        nodes->push_back({s0.epoch + tb * TU, xb.head<3>() * LU, xb.tail<3>() * VU, fb.tail<3>() * AU});
        return true;
    };
    integ.integrate(rhs, 0.0, x, tc1, obs);
    StateVector out = from_canonical<6>(s0.epoch, tc1, x);
    out.epoch = t1;
    return out;
}

std::pair<StateVector, Stm> Propagator::propagate_with_stm(const StateVector& s0, const Stm& phi0,
                                                           Epoch t1) const {
    if (t1 == s0.epoch) return {s0, phi0};
    CanonicalRhs<42> rhs{model_.get(), s0.epoch};
    X42 x = to_canonical<42>(s0, &phi0);
    Dop853<42, 6> integ(config_);
    const double tc1 = (t1 - s0.epoch) / TU;
    integ.integrate(rhs, 0.0, x, tc1);
    StateVector out = from_canonical<42>(s0.epoch, tc1, x);
    out.epoch = t1;
    return {out, stm_from_canonical<42>(x)};
}

std::pair<StateVector, Stm> Propagator::propagate_with_stm(const StateVector& s0, Epoch t1) const {
    return propagate_with_stm(s0, Stm::Identity(), t1);
}

StateVector Propagator::propagate_observed(
    const StateVector& s0, Epoch t1,
    const std::function<bool(const StateVector&, const StateVector&)>& on_step) const {
    if (t1 == s0.epoch) return s0;
    CanonicalRhs<6> rhs{model_.get(), s0.epoch};
    X6 x = to_canonical<6>(s0);
    Dop853<6> integ(config_);
    const double tc1 = (t1 - s0.epoch) / TU;
    auto obs = [&](double ta, const X6& xa, const X6&, double tb, const X6& xb, const X6&) {
        return on_step(from_canonical<6>(s0.epoch, ta, xa), from_canonical<6>(s0.epoch, tb, xb));
    };
    const double tend = integ.integrate(rhs, 0.0, x, tc1, obs);
    StateVector out = from_canonical<6>(s0.epoch, tend, x);
    if (tend == tc1) out.epoch = t1;
    return out;
}

double Propagator::event_function(const EventSpec& spec, const StateVector& s) const {
    switch (spec.kind) {
        case EventKind::Perilune:
        case EventKind::Apolune:
            return s.r.dot(s.v) / (s.r.norm() * s.v.norm());
        case EventKind::TrueAnomaly:
            return wrap_deg_180(osculating_true_anomaly(s, model_->mu_moon) - spec.true_anomaly_deg) / 180.0;
        case EventKind::EmXzPlane: {
            const RotatingFrameDef f = model_->ephemeris().em_frame(s.epoch);
            return f.rotation.row(1).dot(s.r) / s.r.norm();
        }
    }
    return 0.0;
}

namespace {

bool direction_matches(const EventSpec& spec, double g_before, double g_after) {
    EventDirection dir = spec.direction;
    if (spec.kind == EventKind::Perilune) dir = EventDirection::Increasing;
    if (spec.kind == EventKind::Apolune) dir = EventDirection::Decreasing;
    const bool up = g_before < 0 && g_after > 0;
    const bool down = g_before > 0 && g_after < 0;
    switch (dir) {
        case EventDirection::Increasing: return up;
        case EventDirection::Decreasing: return down;
        case EventDirection::Any: return up || down;
    }
    return false;
}

}  // namespace

template <int N>
EventResult Propagator::find_event_impl(const StateVector& s0, const EventSpec& spec, double horizon_s) const {
    if (!(horizon_s > 0)) throw Error(ErrorCode::InvalidArgument, "event horizon must be positive");
    if (spec.count < 1) throw Error(ErrorCode::InvalidArgument, "event count must be >= 1");

    const Epoch t0 = s0.epoch;
    CanonicalRhs<N> rhs{model_.get(), t0};
    XN<N> x = to_canonical<N>(s0);
    Dop853<N, 6> integ(config_);
    const double tc_end = horizon_s / TU;

    auto g_of = [&](double tc, const XN<N>& xs) {
        return event_function(spec, from_canonical<N>(t0, tc, xs));
    };

    // Re-propagates from a bracket start to time tc (never uses interpolation).
    auto state_at = [&](double ta, const XN<N>& xa, double tc) {
        XN<N> xs = xa;
        if (tc != ta) {
            Dop853<N, 6> sub(single_step_config(config_, tc - ta));
            sub.integrate(rhs, ta, xs, tc);
        }
        return xs;
    };

    double g_sig = g_of(0.0, x);
    double t_sig = 0.0;
    XN<N> x_sig = x;
    bool have_sig = std::abs(g_sig) > kSignificant;
    bool ever_sig = have_sig;
    int found = 0;
    std::optional<EventResult> result;
    const double tol = kEventTimeTolS / TU;

    auto obs = [&](double, const XN<N>&, const XN<N>&, double tb, const XN<N>& xb, const XN<N>&) {
        const double gb = g_of(tb, xb);
        if (std::abs(gb) <= kSignificant) return true;
        ever_sig = true;
        if (!have_sig) {
            have_sig = true;
            g_sig = gb;
            t_sig = tb;
            x_sig = xb;
            return true;
        }
        const bool wrapped = spec.kind == EventKind::TrueAnomaly && std::abs(gb - g_sig) > 0.5;
        if (!wrapped && ((g_sig < 0) != (gb < 0)) && direction_matches(spec, g_sig, gb)) {
            // Illinois refinement on [t_sig, tb].
            double a = t_sig, b = tb, ga = g_sig, gbb = gb;
            XN<N> xa = x_sig;
            int side = 0;
            for (int it = 0; it < 200 && std::abs(b - a) > tol; ++it) {
                double c = b - gbb * (b - a) / (gbb - ga);
                if (!(c > std::min(a, b) && c < std::max(a, b)) || it % 4 == 3) c = 0.5 * (a + b);
                const XN<N> xc = state_at(a, xa, c);
                const double gc = g_of(c, xc);
                if (gc == 0.0) {
                    a = b = c;
                    xa = xc;
                    break;
                }
                if ((gc < 0) == (ga < 0)) {
                    a = c;
                    ga = gc;
                    xa = xc;
                    if (side == -1) gbb *= 0.5;
                    side = -1;
                } else {
                    b = c;
                    gbb = gc;
                    if (side == 1) ga *= 0.5;
                    side = 1;
                }
            }
            const double troot = 0.5 * (a + b);
            if (troot * TU > kStartGuardS) {
                ++found;
                if (found == spec.count) {
                    const XN<N> xr = state_at(a, xa, troot);
                    EventResult r;
                    r.state = from_canonical<N>(t0, troot, xr);
                    if constexpr (N == 42) r.stm = stm_from_canonical<N>(xr);
                    result = r;
                    return false;
                }
            }
        }
        g_sig = gb;
        t_sig = tb;
        x_sig = xb;
        return true;
    };
    integ.integrate(rhs, 0.0, x, tc_end, obs);
    if (result) return *result;
    if (!ever_sig) throw Error(ErrorCode::DegenerateEvent, "event function never leaves zero");
    throw Error(ErrorCode::EventNotFound, "event not found within horizon");
}

EventResult Propagator::find_event(const StateVector& s0, const EventSpec& spec, double horizon_s) const {
    return find_event_impl<6>(s0, spec, horizon_s);
}

EventResult Propagator::find_event_with_stm(const StateVector& s0, const EventSpec& spec,
                                            double horizon_s) const {
    return find_event_impl<42>(s0, spec, horizon_s);
}

StateVector propagate(const Propagator& p, const StateVector& s0, Epoch t1) { return p.propagate(s0, t1); }

std::pair<StateVector, Stm> propagate_with_stm(const Propagator& p, const StateVector& s0, Epoch t1) {
    return p.propagate_with_stm(s0, t1);
}

EventResult find_event(const Propagator& p, const StateVector& s0, const EventSpec& spec, double horizon_s) {
    return p.find_event(s0, spec, horizon_s);
}

Vec6 to_em(const EphemerisProvider& eph, const StateVector& s) {
    return eph.sxform_inertial_to_em(s.epoch) * s.vector();
}

StateVector from_em(const EphemerisProvider& eph, Epoch t, const Vec6& em) {
    return StateVector(t, Vec6(eph.sxform_em_to_inertial(t) * em));
}

double jacobi_constant(const DynamicsModel& model, const StateVector& s) {
    const EphemerisProvider& eph = model.ephemeris();
    const Vec6 em = to_em(eph, s);
    const Vec3 r = em.head<3>();
    const Vec3 v = em.tail<3>();
    const Vec3 d = eph.em_frame(s.epoch).rotation * eph.position(Body::Earth, s.epoch);
    const double a = d.norm();
    const double n2 = (model.mu_earth + model.mu_moon) / (a * a * a);
    const double rn = r.norm();
    const double R = model.moon_radius_km;

    double U = model.mu_moon / rn + 0.5 * n2 * (r.x() * r.x() + r.y() * r.y());
    if (model.earth_enabled) {
        U += model.mu_earth / (r - d).norm() - model.mu_earth * d.dot(r) / (a * a * a);
    }
    U -= model.mu_moon * model.j2 * R * R / (2.0 * rn * rn * rn) * (3.0 * r.z() * r.z() / (rn * rn) - 1.0);
    return (2.0 * U - v.squaredNorm()) / (VU * VU);
}

}  // namespace nrhonav
