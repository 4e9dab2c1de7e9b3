#pragma once

#include "nrhonav/core/state.hpp"

namespace nrhonav {

/// Tolerance below which the eccentricity vector is treated as zero.
inline constexpr double kCircularEccentricity = 1e-9;

/**
 * Osculating two-body true anomaly [deg, 0..360) of a Moon-centered state.
 *
 * For |e| <= 1e-9 the angle is measured from the ascending node of the
 * osculating plane on the I xy-plane (or from +x_I when the plane is
 * equatorial). Throws DegenerateOrbit when |r x v| is negligible.
 */
double osculating_true_anomaly(const Vec3& r, const Vec3& v, double mu);
double osculating_true_anomaly(const StateVector& s, double mu);

/// Wraps an angle in degrees into (-180, 180].
double wrap_deg_180(double deg);

/// Wraps an angle in degrees into [0, 360).
double wrap_deg_360(double deg);

}  // namespace nrhonav
