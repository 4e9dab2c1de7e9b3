#include "fixtures.hpp"
#include "../common/oracles.hpp"

#include "nrhonav/control/control.hpp"
#include "nrhonav/core/error.hpp"
#include "nrhonav/core/random.hpp"

#include <doctest.h>

#include <cmath>

using namespace nrhonav;
using namespace nrhonav::testing;

namespace {

/// An enriched-model reference state a few revolutions in, away from perilune.
StateVector enriched_state(double revs = 3.0) {
    const auto ref = enriched_reference();
    return ref->lookup_state(ref->t_begin() + revs * ref->period());
}

TargetSpec target_for(const StateVector& s, int n) { return enriched_reference()->nth_perilune_after(s.epoch, n); }

StateVector perturbed(const StateVector& s, std::uint64_t seed, double pos_3s_km, double vel_3s_kms) {
    RandomStream rng(seed);
    return {s.epoch, s.r + rng.normal3(pos_3s_km / 3.0), s.v + rng.normal3(vel_3s_kms / 3.0)};
}

}  // namespace

TEST_CASE("trigger threshold is closed") {
    ControllerConfig cfg;
    cfg.vx_trig_ms = 20.0;
    CHECK(evaluate_trigger(20.0, cfg));
    CHECK_FALSE(evaluate_trigger(0.0, cfg));
    CHECK_FALSE(evaluate_trigger(19.99, cfg));
}

TEST_CASE("method names round-trip") {
    for (auto m : {ControlMethod::DC, ControlMethod::SLMP, ControlMethod::UtDc, ControlMethod::UtSlmp}) {
        CHECK(control_method_from_string(to_string(m)) == m);
    }
    CHECK(uses_unscented(ControlMethod::UtSlmp));
    CHECK_FALSE(uses_unscented(ControlMethod::DC));
}

TEST_CASE("minimum-norm updates") {
    SUBCASE("DC scalar structure") {
        const Vec3 u = dc_step(Eigen::RowVector3d(1, 0, 0), 0.5e-3);
        CHECK((u - Vec3(-0.5e-3, 0, 0)).norm() < 1e-18);
        try {
            (void)dc_step(Eigen::RowVector3d::Zero(), 1.0);
            FAIL("expected DegenerateRow");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::DegenerateRow);
        }
    }
    SUBCASE("SLMP inside the slab does nothing") {
        int active = -1;
        CHECK(slmp_step(Eigen::RowVector3d(3, -1, 2), 0.8, 0.9, &active).norm() == 0.0);
        CHECK(active == 0);
    }
    SUBCASE("SLMP one active half-space lands on the boundary") {
        const Eigen::RowVector3d b(2.0, -1.0, 0.5);
        const double tol = 0.9e-3;
        const double F = 2.0 * tol;
        int active = -1;
        const Vec3 u = slmp_step(b, F, tol, &active);
        CHECK(active != 1);
        CHECK(F + b * u == doctest::Approx(tol).epsilon(1e-12));
        const Vec3 oracle_u =
            oracle::project_onto_two_halfspaces(Vec3::Zero(), b.transpose(), tol - F, -b.transpose(), tol + F);
        CHECK((u - oracle_u).norm() < 1e-15);
    }
    SUBCASE("SLMP never needs more than DC on the same linear problem") {
        RandomStream rng(3);
        for (int i = 0; i < 200; ++i) {
            const Eigen::RowVector3d b = rng.normal3(1000.0).transpose();
            const double F = rng.normal(0.02);
            const double tol = 0.009;
            int active = -1;
            const Vec3 us = slmp_step(b, F, tol, &active);
            CHECK(active != 1);
            CHECK(us.norm() <= dc_step(b, F).norm() + 1e-9);
        }
    }
}

TEST_CASE("two half-space projection matches the active-set oracle") {
    RandomStream rng(11);
    for (int i = 0; i < 1000; ++i) {
        const Vec3 y = rng.normal3(2.0);
        const Vec3 xi1 = rng.normal3();
        const bool slab = i % 2 == 0;
        const Vec3 xi2 = slab ? Vec3(-xi1) : rng.normal3();
        double eta1 = rng.normal(1.0);
        double eta2 = rng.normal(1.0);
        if (slab && eta1 + eta2 <= 0.0) eta2 = -eta1 + std::abs(rng.normal(1.0)) + 1e-3;
        const HalfspaceProjection p = project_two_halfspaces(y, xi1, eta1, xi2, eta2);
        const Vec3 x = y - p.nu1 * xi1 - p.nu2 * xi2;
        const Vec3 ref = oracle::project_onto_two_halfspaces(y, xi1, eta1, xi2, eta2);
        REQUIRE(ref.allFinite());
        CHECK((x - ref).norm() < 1e-10);
        if (slab) CHECK(p.active_case != 1);
    }
}

TEST_CASE("vx prediction on the periodic orbit") {
    const ReferenceOrbit& ref = circular_reference();
    const Propagator& p = *circular_propagator();
    ControllerConfig cfg;
    cfg.target_perilune = 3;
    const StateVector s = ref.apolunes().front().state;
    const TargetSpec target = ref.nth_perilune_after(s.epoch, 3);
    const VxPrediction pr = predict_vx_at_target(p, cfg, s, Vec3::Zero());
    CHECK(std::abs(pr.vx - target.vx_em) * 1e3 < 0.1);
    CHECK(std::abs(pr.tf - target.epoch) < 60.0);
}

TEST_CASE("vx sensitivity row predicts small maneuvers") {
    const Propagator& p = *enriched_nominal_propagator();
    const ControllerConfig cfg;
    const StateVector s = enriched_state();
    const VxPrediction base = predict_vx_at_target(p, cfg, s, Vec3::Zero());
    RandomStream rng(5);
    for (int i = 0; i < 3; ++i) {
        const Vec3 u = rng.unit_vector() * 1e-6;  // 1 mm/s
        const double dv = predict_vx_at_target(p, cfg, s, u, false).vx - base.vx;
        const double lin = base.b * u;
        CHECK(std::abs(lin / dv - 1.0) < 0.05);
    }
}

TEST_CASE("vx prediction is reproducible for a perturbed state") {
    const Propagator& p = *enriched_nominal_propagator();
    const ControllerConfig cfg;
    StateVector s = enriched_state();
    const TargetSpec target = target_for(s, cfg.target_perilune);
    s.r += Vec3(1.0, 0.0, 0.0);
    const VxPrediction a = predict_vx_at_target(p, cfg, s, Vec3::Zero());
    const VxPrediction b = predict_vx_at_target(p, cfg, s, Vec3::Zero());
    CHECK(a.vx == b.vx);
    CHECK(a.b == b.b);
    CHECK(std::abs(a.vx - target.vx_em) > 1e-5);
}

TEST_CASE("DC and SLMP satisfy the nonlinear constraint") {
    const Propagator& p = *enriched_nominal_propagator();
    ControllerConfig cfg;
    cfg.vx_tol_ms = 1.0;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const StateVector s = perturbed(enriched_state(), seed, 5.0, 3e-5);
        const TargetSpec target = target_for(s, cfg.target_perilune);

        const ManeuverResult dc = dc_maneuver(p, cfg, s, target);
        CHECK(dc.converged);
        CHECK(dc.iterations <= 3);
        const StateVector sd(s.epoch, s.r, s.v);
        const double vd = predict_vx_at_target(p, cfg, sd, dc.u, false).vx;
        CHECK(std::abs(vd - target.vx_em) * 1e3 <= cfg.vx_tol_ms);

        ControllerConfig scfg = cfg;
        scfg.method = ControlMethod::SLMP;
        const ManeuverResult sl = slmp_maneuver(p, scfg, s, target);
        CHECK(sl.converged);
        const double vs = predict_vx_at_target(p, scfg, s, sl.u, false).vx;
        CHECK(std::abs(vs - target.vx_em) * 1e3 <= cfg.vx_tol_ms);
        CHECK(sl.u.norm() <= dc.u.norm() + 1e-9);
    }
}

TEST_CASE("no update when the initial violation is within tolerance") {
    const ReferenceOrbit& ref = circular_reference();
    const Propagator& p = *circular_propagator();
    ControllerConfig cfg;
    cfg.target_perilune = 3;
    const StateVector s = ref.apolunes().front().state;
    const TargetSpec target = ref.nth_perilune_after(s.epoch, 3);
    const ManeuverResult dc = dc_maneuver(p, cfg, s, target);
    CHECK(dc.iterations == 0);
    CHECK(dc.u.norm() == 0.0);
    cfg.method = ControlMethod::SLMP;
    const ManeuverResult sl = slmp_maneuver(p, cfg, s, target);
    CHECK(sl.iterations == 0);
    CHECK(sl.u.norm() == 0.0);

    cfg.method = ControlMethod::DC;
    const ManeuverResult idle = compute_maneuver(p, cfg, FilterState(s, Mat6::Identity() * 1e-12), target);
    CHECK_FALSE(idle.triggered);
    CHECK(idle.u.norm() == 0.0);
}

TEST_CASE("unscented mean of vx") {
    const Propagator& p = *enriched_nominal_propagator();
    ControllerConfig cfg;
    cfg.target_perilune = 1;
    const StateVector s = enriched_state(3.3);

    SUBCASE("a vanishing covariance gives the point prediction") {
        const FilterState fs(s, Mat6::Identity() * 1e-20);
        const double point = predict_vx_at_target(p, cfg, s, Vec3::Zero(), false).vx;
        CHECK(std::abs(ut_mean_vx(p, cfg, fs) - point) < 1e-9);
    }
    SUBCASE("agrees with a Monte-Carlo mean") {
        Vec6 sd;
        sd << Vec3::Constant(1.0), Vec3::Constant(1e-5);
        const Mat6 cov = sd.cwiseAbs2().asDiagonal();
        const FilterState fs = FilterState::from_physical(s, cov);
        const double ut = ut_mean_vx(p, cfg, fs);
        RandomStream rng(77);
        constexpr int n = 2000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            Vec6 z;
            for (int k = 0; k < 6; ++k) z[k] = rng.normal(sd[k]);
            const double v = predict_vx_at_target(p, cfg, StateVector(s.epoch, s.vector() + z), Vec3::Zero(), false).vx;
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum2 / n - mean * mean) / n);
        CHECK(std::abs(ut - mean) < 3.0 * se);
    }
}
