#pragma once

#include "nrhonav/core/constants.hpp"
#include "nrhonav/core/types.hpp"
#include "nrhonav/frames/ephemeris.hpp"

#include <memory>
#include <string>

namespace nrhonav {

struct SrpParams {
    bool enabled = false;
    double cr = 1.3;
    double area_to_mass_m2_kg = 0.01;
    double pressure_kn_km2 = constants::kSolarPressureKnPerKm2;
};

/// Ephemeris quantities shared by every force term at one epoch.
struct ForceEnvironment {
    Vec3 earth = Vec3::Zero();
    Vec3 sun = Vec3::Zero();
    Mat3 moon_pi = Mat3::Identity();  ///< rotation I -> P
    bool has_earth = false;
    bool has_sun = false;
};

/**
 * Moon-centered equations of motion: point mass, J2 evaluated in the Moon
 * principal-axes frame, Earth and Sun third-body terms, cannonball SRP.
 */
class DynamicsModel {
public:
    DynamicsModel(std::shared_ptr<const EphemerisProvider> ephemeris);

    double mu_moon = constants::kMuMoon;
    double j2 = constants::kMoonJ2;
    double moon_radius_km = constants::kMoonEquatorialRadiusKm;
    bool earth_enabled = true;
    double mu_earth = constants::kMuEarth;
    bool sun_enabled = true;
    double mu_sun = constants::kMuSun;
    SrpParams srp;

    /// Convenience presets that match the two analytic ephemeris modes.
    static std::shared_ptr<DynamicsModel> circular();
    static std::shared_ptr<DynamicsModel> enriched(const SrpParams& srp = {true});

    [[nodiscard]] const EphemerisProvider& ephemeris() const { return *ephemeris_; }
    [[nodiscard]] std::shared_ptr<const EphemerisProvider> ephemeris_ptr() const { return ephemeris_; }

    void validate() const;

    [[nodiscard]] ForceEnvironment environment(Epoch t) const;

    /// Total acceleration [km/s^2] in frame I.
    [[nodiscard]] Vec3 acceleration(Epoch t, const Vec3& r) const;
    [[nodiscard]] Vec3 acceleration(const ForceEnvironment& env, const Vec3& r) const;

    /// Gravity gradient d(acceleration)/dr [1/s^2]; the SRP partial is neglected.
    [[nodiscard]] Mat3 gradient(const ForceEnvironment& env, const Vec3& r) const;
    [[nodiscard]] Mat3 gradient(Epoch t, const Vec3& r) const { return gradient(environment(t), r); }

    // Individual terms, exposed for testing.
    [[nodiscard]] Vec3 point_mass(const Vec3& r) const;
    [[nodiscard]] Vec3 j2_acceleration(const Mat3& moon_pi, const Vec3& r) const;
    [[nodiscard]] Vec3 third_body(double mu, const Vec3& d, const Vec3& r) const;
    [[nodiscard]] Vec3 srp_acceleration(const ForceEnvironment& env, const Vec3& r) const;

    [[nodiscard]] std::string descriptor() const;

private:
    std::shared_ptr<const EphemerisProvider> ephemeris_;
};

}  // namespace nrhonav
