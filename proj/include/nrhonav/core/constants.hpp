#pragma once

#include <numbers>

namespace nrhonav::constants {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;
inline constexpr double kArcsecToRad = kDegToRad / 3600.0;

inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kDaysPerYear = 365.25;

// Canonical units used inside the integrator and the filter.
inline constexpr double kLengthUnitKm = 3000.0;
inline constexpr double kTimeUnitS = 2346.711856601253;
inline constexpr double kVelocityUnitKmS = kLengthUnitKm / kTimeUnitS;
inline constexpr double kAccelUnitKmS2 = kLengthUnitKm / (kTimeUnitS * kTimeUnitS);

// Gravitational parameters [km^3/s^2].
inline constexpr double kMuMoon = 4902.800066;
inline constexpr double kMuEarth = 398600.435436;
inline constexpr double kMuSun = 132712440041.9394;

inline constexpr double kMoonEquatorialRadiusKm = 1738.0;
inline constexpr double kMoonPolarRadiusKm = 1736.0;
inline constexpr double kMoonJ2 = 2.0330530e-4;

inline constexpr double kAuKm = 149597870.7;
inline constexpr double kEarthMoonDistanceKm = 384400.0;
inline constexpr double kEarthMoonEccentricity = 0.0549;
inline constexpr double kSiderealYearS = 365.256363004 * kSecondsPerDay;
inline constexpr double kSunInclinationDeg = 5.145;

/// Solar radiation pressure at 1 AU: 4.56e-6 N/m^2 expressed in kN/km^2.
inline constexpr double kSolarPressureKnPerKm2 = 4.56e-3;

/// Start epoch of the baseline, seconds past J2000.
inline constexpr double kBaselineEpochS = 946728069.183919;

}  // namespace nrhonav::constants
