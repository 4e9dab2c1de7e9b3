#pragma once

/**
 * @file ephemeris.hpp
 * @brief Earth/Sun positions and Moon orientation about a Moon-centered inertial frame.
 *
 * Three modes are supported:
 *  - circular-analytic: Earth on a circular Kepler orbit about the Moon, no Sun,
 *    Moon spin axis aligned with the orbit normal.  Dynamics in this mode are
 *    autonomous in the Earth-Moon rotating frame.
 *  - enriched-analytic: eccentric Earth-Moon orbit, Sun on a circular inclined
 *    orbit about the Earth-Moon barycenter, tilted Moon spin axis.
 *  - table: Earth and Sun states read from CSV and interpolated with cubic
 *    Hermite polynomials. Queries outside the table span throw OutOfWindow.
 */

#include "nrhonav/core/constants.hpp"
#include "nrhonav/core/types.hpp"

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace nrhonav {

enum class EphemerisMode { CircularAnalytic, EnrichedAnalytic, Table };
enum class Body { Earth, Sun };

const char* to_string(EphemerisMode mode);
EphemerisMode ephemeris_mode_from_string(const std::string& name);

/// Position, velocity and acceleration of a body relative to the Moon, frame I.
struct BodyState {
    Vec3 position = Vec3::Zero();      ///< km
    Vec3 velocity = Vec3::Zero();      ///< km/s
    Vec3 acceleration = Vec3::Zero();  ///< km/s^2
};

struct AnalyticEphemerisParams {
    Epoch reference_epoch{constants::kBaselineEpochS};

    double mu_earth = constants::kMuEarth;
    double mu_moon = constants::kMuMoon;

    // Earth orbit relative to the Moon, in the I xy-plane.
    double earth_sma_km = constants::kEarthMoonDistanceKm;
    double earth_eccentricity = 0.0;
    double earth_periapsis_longitude_deg = 180.0;
    double earth_mean_anomaly_deg = 0.0;

    // Sun on a circular orbit about the Earth-Moon barycenter.
    bool sun_enabled = false;
    double sun_distance_km = constants::kAuKm;
    double sun_period_s = constants::kSiderealYearS;
    double sun_inclination_deg = constants::kSunInclinationDeg;
    double sun_longitude_deg = 0.0;

    // Uniform Moon rotation about a fixed pole.
    double moon_pole_tilt_deg = 0.0;
    double moon_pole_node_deg = 0.0;
    double moon_rotation_period_s = 0.0;  ///< 0 selects the Earth-Moon orbital period
    double moon_initial_phase_deg = 0.0;

    static AnalyticEphemerisParams circular();
    static AnalyticEphemerisParams enriched();
};

/// One row of an ephemeris table.
struct TableNode {
    double t = 0.0;  ///< seconds past reference
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
};

/// Cubic Hermite interpolant over position/velocity nodes.
class HermiteTable {
public:
    HermiteTable() = default;
    explicit HermiteTable(std::vector<TableNode> nodes);

    static HermiteTable from_csv(const std::filesystem::path& path);

    [[nodiscard]] bool empty() const { return nodes_.empty(); }
    [[nodiscard]] double t_begin() const;
    [[nodiscard]] double t_end() const;
    [[nodiscard]] const std::vector<TableNode>& nodes() const { return nodes_; }

    /// Interpolated state; throws OutOfWindow outside [t_begin, t_end].
    [[nodiscard]] BodyState evaluate(double t) const;

private:
    std::vector<TableNode> nodes_;
};

/// Orthonormal Earth-Moon rotating basis and its time derivative at one epoch.
struct RotatingFrameDef {
    Mat3 rotation = Mat3::Identity();       ///< rows are x,y,z EM axes in frame I
    Mat3 rotation_rate = Mat3::Zero();      ///< time derivative of `rotation`
    Vec3 angular_velocity = Vec3::Zero();   ///< frame angular velocity in I [rad/s]
};

class EphemerisProvider {
public:
    /// Analytic provider (circular or enriched).
    EphemerisProvider(EphemerisMode mode, AnalyticEphemerisParams params);

    /// Table provider; orientation and Moon model still come from `params`.
    EphemerisProvider(HermiteTable earth, std::optional<HermiteTable> sun,
                      AnalyticEphemerisParams params);

    static EphemerisProvider circular_analytic() {
        return {EphemerisMode::CircularAnalytic, AnalyticEphemerisParams::circular()};
    }
    static EphemerisProvider enriched_analytic() {
        return {EphemerisMode::EnrichedAnalytic, AnalyticEphemerisParams::enriched()};
    }

    [[nodiscard]] EphemerisMode mode() const { return mode_; }
    [[nodiscard]] const AnalyticEphemerisParams& params() const { return params_; }
    [[nodiscard]] bool has_sun() const;

    [[nodiscard]] Epoch window_begin() const;
    [[nodiscard]] Epoch window_end() const;

    /// Earth or Sun relative to the Moon in frame I.
    [[nodiscard]] BodyState body_state(Body body, Epoch t) const;
    [[nodiscard]] Vec3 position(Body body, Epoch t) const { return body_state(body, t).position; }

    /// Rotation taking frame I vectors into the Moon principal-axes frame.
    [[nodiscard]] Rotation<Frame::P, Frame::I> moon_orientation(Epoch t) const;

    [[nodiscard]] RotatingFrameDef em_frame(Epoch t) const;

    /// 6x6 state transformation from I to EM (position and velocity).
    [[nodiscard]] Mat6 sxform_inertial_to_em(Epoch t) const;
    [[nodiscard]] Mat6 sxform_em_to_inertial(Epoch t) const;

    /// Period of the Earth's Kepler orbit about the Moon [s].
    [[nodiscard]] double earth_orbit_period() const;
    [[nodiscard]] double moon_rotation_period() const;

    /// A short text description used to fingerprint generated artifacts.
    [[nodiscard]] std::string descriptor() const;

private:
    void check_window(Epoch t) const;
    [[nodiscard]] BodyState earth_analytic(Epoch t) const;
    [[nodiscard]] BodyState sun_analytic(Epoch t, const BodyState& earth) const;

    EphemerisMode mode_;
    AnalyticEphemerisParams params_;
    HermiteTable earth_table_;
    std::optional<HermiteTable> sun_table_;
    Mat3 pole_alignment_ = Mat3::Identity();
};

}  // namespace nrhonav
