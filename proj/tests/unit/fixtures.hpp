#pragma once

// Shared, lazily built test objects. Building a reference takes a few seconds,
// so each one is made once per test binary.

#include "nrhonav/reference/reference_orbit.hpp"
#include "nrhonav/sim/campaign.hpp"

#include <memory>

namespace nrhonav::testing {

inline const Epoch kStart(constants::kBaselineEpochS);

inline std::shared_ptr<const Propagator> circular_propagator() {
    static const auto p = std::make_shared<const Propagator>(DynamicsModel::circular());
    return p;
}

/// Five-revolution periodic orbit of the circular model.
inline const ReferenceOrbit& circular_reference() {
    static const ReferenceOrbit ref = [] {
        ReferenceGenConfig gen;
        gen.revolutions = 5;
        return build_baseline_reference(*circular_propagator(), kStart, gen, SeedSource::Cr3bp);
    }();
    return ref;
}

/// Default scenario reference in the enriched model, long enough for short campaigns.
inline std::shared_ptr<const ReferenceOrbit> enriched_reference() {
    static const auto ref = [] {
        ScenarioConfig cfg;
        cfg.campaign.reference_revolutions = 22;
        return build_reference(cfg);
    }();
    return ref;
}

inline std::shared_ptr<const Propagator> enriched_nominal_propagator() {
    static const auto p = [] {
        const ScenarioConfig cfg;
        return std::make_shared<const Propagator>(make_reference_model(cfg), cfg.dynamics.integrator);
    }();
    return p;
}

}  // namespace nrhonav::testing
