#include "fixtures.hpp"

#include "nrhonav/core/error.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace nrhonav;
using namespace nrhonav::testing;

namespace {

template <class Fn>
ErrorCode error_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

void check_invariants(const ReferenceOrbit& ref) {
    const auto& p = ref.perilunes();
    REQUIRE(p.size() >= 2);
    for (std::size_t i = 1; i < p.size(); ++i) {
        CHECK(p[i].epoch > p[i - 1].epoch);
        CHECK(std::abs((p[i].epoch - p[i - 1].epoch) / ref.period() - 1.0) < 0.1);
    }
    for (const auto& n : ref.nodes()) CHECK(n.r.norm() > constants::kMoonEquatorialRadiusKm);
}

}  // namespace

TEST_CASE("circular reference: one perilune per revolution, stable radii") {
    const ReferenceOrbit& ref = circular_reference();
    CHECK(ref.perilunes().size() == 5);
    check_invariants(ref);

    // Re-propagating the first node for K revolutions reproduces the perilunes.
    const Propagator& p = *circular_propagator();
    const StateVector s0 = ref.lookup_state(ref.t_begin());
    const double r0 = ref.perilunes().front().state.r.norm();
    for (int k = 1; k <= 5; ++k) {
        const EventResult ev = p.find_event(s0, EventSpec::perilune(k), (k + 1) * ref.period());
        CHECK(std::abs(ev.state.r.norm() - r0) < 1.0);
    }
    // The periodic reference has the same vx at every perilune.
    for (const auto& e : ref.perilunes()) CHECK(std::abs(e.vx_em - ref.perilunes().front().vx_em) * 1e3 < 0.01);
    const double rp = ref.perilunes().front().state.r.norm();
    CHECK((rp > 2000.0 && rp < 8000.0));
}

TEST_CASE("state lookup") {
    const ReferenceOrbit& ref = circular_reference();
    const auto& nodes = ref.nodes();
    const TrajectoryNode& n = nodes[nodes.size() / 3];
    const StateVector s = ref.lookup_state(n.epoch);
    CHECK((s.r - n.r).norm() == 0.0);
    CHECK((s.v - n.v).norm() == 0.0);

    const Propagator& p = *circular_propagator();
    for (std::size_t i : {nodes.size() / 5, nodes.size() / 2, nodes.size() - 3}) {
        const TrajectoryNode& a = nodes[i];
        const Epoch mid = a.epoch + 0.5 * (nodes[i + 1].epoch - a.epoch);
        const StateVector direct = p.propagate(StateVector(a.epoch, a.r, a.v), mid);
        CHECK((ref.lookup_state(mid).r - direct.r).norm() < 1e-3);
    }
    CHECK(error_of([&] { (void)ref.lookup_state(ref.t_end() + 10.0); }) == ErrorCode::OutOfSpan);
    CHECK(error_of([&] { (void)ref.lookup_state(ref.t_begin() - 10.0); }) == ErrorCode::OutOfSpan);
}

TEST_CASE("downstream perilune lookup") {
    const ReferenceOrbit& ref = circular_reference();
    const auto& p = ref.perilunes();
    const TargetSpec t1 = ref.nth_perilune_after(p[1].epoch - 1.0, 1);
    CHECK(t1.epoch == p[1].epoch);
    CHECK(t1.vx_em == p[1].vx_em);
    const TargetSpec strictly = ref.nth_perilune_after(p[1].epoch, 1);
    CHECK(strictly.epoch == p[2].epoch);
    const TargetSpec t4 = ref.nth_perilune_after(p[0].epoch - 1.0, 4);
    CHECK(std::abs((t4.epoch - p[0].epoch) / ref.period() - 3.0) < 0.05);
    CHECK(error_of([&] { (void)ref.nth_perilune_after(p[0].epoch - 1.0, 6); }) == ErrorCode::OutOfSpan);

    const auto enriched = enriched_reference();
    const Epoch t = enriched->t_begin() + 0.5 * enriched->period();
    const TargetSpec t7 = enriched->nth_perilune_after(t, 7);
    CHECK(std::abs((t7.epoch - enriched->nth_perilune_after(t, 1).epoch) / enriched->period() - 6.0) < 0.1);
}

TEST_CASE("a seed inside the Moon is rejected") {
    const Propagator& p = *circular_propagator();
    ReferenceGenConfig gen;
    gen.revolutions = 2;
    const SymmetricSeed bad{1500.0, 0.0, 0.1};
    const ErrorCode code = error_of([&] { (void)generate_reference(p, kStart, bad, gen); });
    CHECK((code == ErrorCode::SeedEscaped || code == ErrorCode::CorrectionDiverged));
}

TEST_CASE("save and load reproduce the reference") {
    const ReferenceOrbit& ref = circular_reference();
    const auto dir = std::filesystem::temp_directory_path() / "nrhonav_reference_io";
    std::filesystem::create_directories(dir);
    ref.save(dir / "ref.csv", dir / "ref.json");
    const ReferenceOrbit back = ReferenceOrbit::load(dir / "ref.csv", dir / "ref.json");
    REQUIRE(back.nodes().size() == ref.nodes().size());
    for (std::size_t i = 0; i < ref.nodes().size(); i += 97) {
        CHECK(back.nodes()[i].epoch == ref.nodes()[i].epoch);
        CHECK(back.nodes()[i].r == ref.nodes()[i].r);
    }
    CHECK(back.period() == ref.period());
    CHECK(back.model_hash() == ref.model_hash());
    CHECK(back.perilunes().size() == ref.perilunes().size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("enriched-model reference is a continuous quasi-periodic orbit") {
    const auto ref = enriched_reference();
    check_invariants(*ref);
    CHECK(ref->perilunes().size() >= 20);
    for (const auto& e : ref->perilunes()) {
        const double rp = e.state.r.norm();
        CHECK((rp > 2000.0 && rp < 8000.0));
    }
    // Continuity: propagating one patch-length arc from a node lands on the table.
    const Propagator& p = *enriched_nominal_propagator();
    const StateVector a = ref->lookup_state(ref->t_begin() + 2.2 * ref->period());
    const Epoch t1 = a.epoch + ref->period();
    CHECK((p.propagate(a, t1).r - ref->lookup_state(t1).r).norm() < 1e-2);
}

TEST_CASE("seed sources") {
    const Propagator& p = *circular_propagator();
    const SymmetricSeed c = cr3bp_seed(p.model());
    CHECK(c.x0 != 0.0);
    CHECK(c.z0 != 0.0);
    const PeriodicSolution sol = correct_symmetric_orbit(p, kStart, c);
    CHECK(std::abs(sol.period_s / 86400.0 - 6.56) < 0.4);
    CHECK(fnv1a64("abc") == fnv1a64("abc"));
    CHECK(fnv1a64("abc") != fnv1a64("abd"));
}
