#include "fixtures.hpp"
#include "../common/oracles.hpp"

#include "nrhonav/core/error.hpp"
#include "nrhonav/dynamics/propagator.hpp"
#include "nrhonav/frames/anomaly.hpp"

#include <doctest.h>

#include <cmath>

using namespace nrhonav;
using namespace nrhonav::testing;

namespace {

std::shared_ptr<DynamicsModel> two_body_model() {
    auto m = std::make_shared<DynamicsModel>(
        std::make_shared<const EphemerisProvider>(EphemerisProvider::circular_analytic()));
    m->j2 = 0.0;
    m->earth_enabled = false;
    m->sun_enabled = false;
    m->srp.enabled = false;
    return m;
}

}  // namespace

TEST_CASE("two-body acceleration on the x axis") {
    const auto m = two_body_model();
    const double r = 7000.0;
    const Vec3 a = m->acceleration(kStart, Vec3(r, 0, 0));
    CHECK(a.x() == doctest::Approx(-constants::kMuMoon / (r * r)).epsilon(1e-15));
    CHECK(a.y() == 0.0);
    CHECK(a.z() == 0.0);
    try {
        (void)m->acceleration(kStart, Vec3(1e-7, 0, 0));
        FAIL("expected SingularRadius");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SingularRadius);
    }
}

TEST_CASE("third-body tidal term vanishes at the Moon's centre") {
    const auto m = DynamicsModel::enriched();
    const Vec3 d(-384400.0, 1000.0, 50.0);
    CHECK(m->third_body(constants::kMuEarth, d, Vec3::Zero()).norm() < 1e-20);
}

TEST_CASE("J2 acceleration is the gradient of the zonal potential") {
    const auto m = DynamicsModel::circular();
    const double mu = m->mu_moon, j2 = m->j2, R = m->moon_radius_km;
    auto potential = [&](const Vec3& r) {
        const double rn = r.norm();
        const double s = r.z() / rn;
        return -(mu * j2 * R * R / (2.0 * rn * rn * rn)) * (3.0 * s * s - 1.0);
    };
    SUBCASE("on the pole") {
        const double r = 4000.0;
        const Vec3 a = m->j2_acceleration(Mat3::Identity(), Vec3(0, 0, r));
        CHECK(a.z() == doctest::Approx(3.0 * mu * j2 * R * R / std::pow(r, 4)).epsilon(1e-13));
        CHECK(std::abs(a.x()) < 1e-20);
    }
    SUBCASE("general point, central differences") {
        const Vec3 r(2500.0, -1800.0, 3100.0);
        const double h = 1e-2;
        Vec3 g;
        for (int k = 0; k < 3; ++k) {
            Vec3 e = Vec3::Zero();
            e[k] = h;
            g[k] = (potential(r + e) - potential(r - e)) / (2.0 * h);
        }
        const Vec3 a = m->j2_acceleration(Mat3::Identity(), r);
        CHECK((a - g).norm() / a.norm() < 1e-8);
    }
    SUBCASE("evaluating in P and rotating back equals rotating the position first") {
        const Mat3 pi = rodrigues(Vec3(0.3, -0.5, 0.8), 0.9);
        const Vec3 r(-4100.0, 2200.0, 900.0);
        const Vec3 a_rot = m->j2_acceleration(pi, r);
        const Vec3 a_ref = pi.transpose() * m->j2_acceleration(Mat3::Identity(), pi * r);
        CHECK((a_rot - a_ref).norm() <= 1e-14 * a_ref.norm());
    }
}

TEST_CASE("SRP pushes away from the Sun with inverse-square scaling") {
    const auto m = DynamicsModel::enriched(SrpParams{true});
    ForceEnvironment env = m->environment(kStart);
    const Vec3 r(1000.0, 2000.0, 3000.0);
    const Vec3 a = m->srp_acceleration(env, r);
    const Vec3 away = (r - env.sun).normalized();
    CHECK(a.normalized().dot(away) == doctest::Approx(1.0).epsilon(1e-12));
    ForceEnvironment far = env;
    // Pressure is referenced to the Earth's distance from the Sun; keep that fixed.
    far.sun = env.sun * 2.0;
    far.earth = env.earth + env.sun;
    const double ratio = m->srp_acceleration(far, r).norm() / a.norm();
    const double expected = (r - env.sun).squaredNorm() / (r - far.sun).squaredNorm();
    CHECK(ratio == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ratio == doctest::Approx(0.25).epsilon(1e-4));
}

TEST_CASE("gravity gradient matches finite differences of the acceleration") {
    const auto m = DynamicsModel::enriched(SrpParams{false});
    const ForceEnvironment env = m->environment(kStart + 1e5);
    const Vec3 r(3000.0, -9000.0, -40000.0);
    const Mat3 g = m->gradient(env, r);
    Mat3 fd;
    for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = 1e-2;
        fd.col(k) = (m->acceleration(env, r + e) - m->acceleration(env, r - e)) / 2e-2;
    }
    CHECK((g - fd).norm() / g.norm() < 1e-7);
}

TEST_CASE("two-body propagation over one period returns to the start") {
    const Propagator p(two_body_model());
    const double r = 6000.0;
    const double v = std::sqrt(constants::kMuMoon / r);
    const StateVector s0(kStart, Vec3(r, 0, 0), Vec3(0, v * std::cos(0.4), v * std::sin(0.4)));
    const double period = 2.0 * constants::kPi * std::sqrt(r * r * r / constants::kMuMoon);
    const StateVector s1 = p.propagate(s0, kStart + period);
    CHECK((s1.r - s0.r).norm() < 1e-6);
    const StateVector same = p.propagate(s0, kStart);
    CHECK(same.r == s0.r);
    CHECK(same.v == s0.v);
}

TEST_CASE("STM of a two-body quarter orbit matches central differences") {
    const Propagator p(two_body_model());
    const double r = 6000.0;
    const double v = std::sqrt(constants::kMuMoon / r);
    const StateVector s0(kStart, Vec3(r, 0, 0), Vec3(0, v * 0.8, v * 0.6));
    const double period = 2.0 * constants::kPi * std::sqrt(r * r * r / constants::kMuMoon);
    const Epoch t1 = kStart + 0.25 * period;
    const auto [s1, phi] = p.propagate_with_stm(s0, t1);
    CHECK((s1.r - p.propagate(s0, t1).r).norm() < 1e-9);
    const Mat6 fd = oracle::central_difference_stm(p, s0, t1, 1e-6);
    CHECK(oracle::max_relative_error(oracle::to_canonical(phi), oracle::to_canonical(fd), 1e-6) < 1e-5);

    const auto [s_same, identity] = p.propagate_with_stm(s0, kStart);
    CHECK(identity == Mat6::Identity());
}

TEST_CASE("Kepler ellipse from apoapsis reaches periapsis after half a period") {
    const Propagator p(two_body_model());
    const double mu = constants::kMuMoon, a = 20000.0, e = 0.7;
    const double ra = a * (1.0 + e);
    const double va = std::sqrt(mu * (1.0 - e) / (a * (1.0 + e)));
    const StateVector s0(kStart, Vec3(-ra, 0, 0), Vec3(0, -va, 0));
    const double period = 2.0 * constants::kPi * std::sqrt(a * a * a / mu);
    const EventResult ev = p.find_event(s0, EventSpec::perilune(), period);
    CHECK(std::abs((ev.state.epoch - kStart) - 0.5 * period) < 1e-4);
    CHECK(ev.state.r.norm() == doctest::Approx(a * (1.0 - e)).epsilon(1e-9));

    const EventResult ta = p.find_event(s0, EventSpec::true_anomaly(90.0), period);
    CHECK(std::abs(osculating_true_anomaly(ta.state, mu) - 90.0) < 1e-6);
}

TEST_CASE("perilune search on a circular orbit reports a degenerate event") {
    const Propagator p(two_body_model());
    const double r = 6000.0;
    const StateVector s0(kStart, Vec3(r, 0, 0), Vec3(0, std::sqrt(constants::kMuMoon / r), 0));
    try {
        (void)p.find_event(s0, EventSpec::perilune(), 86400.0);
        FAIL("expected an event error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateEvent);
    }
}

TEST_CASE("NRHO: reversibility, Liouville, chain rule, Jacobi constant") {
    const ReferenceOrbit& ref = circular_reference();
    const Propagator& p = *circular_propagator();
    const StateVector s0 = ref.apolunes().front().state;
    const Epoch t1 = s0.epoch + ref.period();

    SUBCASE("forward then backward over one revolution") {
        const StateVector back = p.propagate(p.propagate(s0, t1), s0.epoch);
        CHECK((back.r - s0.r).norm() < 1e-6);
    }
    SUBCASE("det of the STM stays one") {
        const auto [s1, phi] = p.propagate_with_stm(s0, t1);
        CHECK(std::abs(phi.determinant() - 1.0) < 1e-3);
    }
    SUBCASE("chain rule") {
        const Epoch tm = s0.epoch + 0.4 * ref.period();
        const auto [sm, phi1] = p.propagate_with_stm(s0, tm);
        const auto [s2, phi2] = p.propagate_with_stm(sm, t1);
        const auto [s2d, phi] = p.propagate_with_stm(s0, t1);
        CHECK((phi2 * phi1 - phi).norm() / phi.norm() < 1e-6);
        const auto [s2c, phi_cont] = p.propagate_with_stm(sm, phi1, t1);
        CHECK((phi_cont - phi).norm() / phi.norm() < 1e-6);
    }
    SUBCASE("Jacobi constant drift") {
        const double c0 = jacobi_constant(p.model(), s0);
        double worst = 0.0;
        p.propagate_observed(s0, t1, [&](const StateVector&, const StateVector& s) {
            worst = std::max(worst, std::abs(jacobi_constant(p.model(), s) - c0));
            return true;
        });
        CHECK(worst < 1e-9);
    }
    SUBCASE("perilune spacing equals the period") {
        const EventResult a = p.find_event(s0, EventSpec::perilune(1), 2.0 * ref.period());
        const EventResult b = p.find_event(s0, EventSpec::perilune(2), 3.0 * ref.period());
        CHECK(std::abs((b.state.epoch - a.state.epoch) / ref.period() - 1.0) < 0.05);
        CHECK(std::abs(ref.period() / 86400.0 - 6.56) / 6.56 < 0.05);
    }
    SUBCASE("xz-plane crossings of the symmetric orbit are perpendicular") {
        const EventResult x = p.find_event(s0, EventSpec::xz_plane(EventDirection::Any), ref.period());
        const Vec6 em = to_em(p.model().ephemeris(), x.state);
        CHECK(std::abs(em[1]) < 1e-6);
    }
    SUBCASE("tighter tolerances converge") {
        auto endpoint = [&](double tol) {
            IntegratorConfig c;
            c.abs_tol = c.rel_tol = tol;
            return Propagator(p.model_ptr(), c).propagate(s0, t1).r;
        };
        const Vec3 r10 = endpoint(1e-10), r11 = endpoint(1e-11), r12 = endpoint(1e-12), r13 = endpoint(1e-13);
        CHECK((r12 - r13).norm() <= (r10 - r13).norm());
        CHECK((r11 - r13).norm() < 1e-3);
    }
}

TEST_CASE("DOP853 reaches eighth-order accuracy on an exponential") {
    IntegratorConfig cfg;
    cfg.abs_tol = cfg.rel_tol = 1e-13;
    Dop853<1> integ(cfg);
    Eigen::Matrix<double, 1, 1> x;
    x << 1.0;
    integ.integrate([](double, const auto& y, auto& dy) { dy = -y; }, 0.0, x, 5.0,
                    [](auto&&...) { return true; });
    CHECK(x[0] == doctest::Approx(std::exp(-5.0)).epsilon(1e-11));
    CHECK(integ.stats().accepted > 0);
}
