#include "nrhonav/dynamics/force_model.hpp"

#include "nrhonav/core/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace nrhonav {

DynamicsModel::DynamicsModel(std::shared_ptr<const EphemerisProvider> ephemeris)
    : ephemeris_(std::move(ephemeris)) {
    if (!ephemeris_) throw Error(ErrorCode::InvalidArgument, "dynamics model needs an ephemeris");
    sun_enabled = ephemeris_->has_sun();
}

std::shared_ptr<DynamicsModel> DynamicsModel::circular() {
    auto eph = std::make_shared<EphemerisProvider>(EphemerisProvider::circular_analytic());
    auto m = std::make_shared<DynamicsModel>(eph);
    m->sun_enabled = false;
    m->srp.enabled = false;
    return m;
}

std::shared_ptr<DynamicsModel> DynamicsModel::enriched(const SrpParams& srp) {
    auto eph = std::make_shared<EphemerisProvider>(EphemerisProvider::enriched_analytic());
    auto m = std::make_shared<DynamicsModel>(eph);
    m->sun_enabled = true;
    m->srp = srp;
    return m;
}

void DynamicsModel::validate() const {
    if (!(mu_moon > 0) || j2 < 0 || !(moon_radius_km > 0)) {
        throw Error(ErrorCode::InvalidArgument, "invalid Moon gravity parameters");
    }
    if (earth_enabled && !(mu_earth > 0)) throw Error(ErrorCode::InvalidArgument, "mu_earth <= 0");
    if ((sun_enabled || srp.enabled) && !ephemeris_->has_sun()) {
        throw Error(ErrorCode::InvalidArgument, "Sun terms require an ephemeris with the Sun");
    }
    if (sun_enabled && !(mu_sun > 0)) throw Error(ErrorCode::InvalidArgument, "mu_sun <= 0");
    if (srp.enabled && !(srp.cr > 0 && srp.area_to_mass_m2_kg > 0 && srp.pressure_kn_km2 > 0)) {
        throw Error(ErrorCode::InvalidArgument, "SRP parameters must be positive when enabled");
    }
}

ForceEnvironment DynamicsModel::environment(Epoch t) const {
    ForceEnvironment env;
    const bool need_sun = sun_enabled || srp.enabled;
    if (earth_enabled || need_sun) {
        env.earth = ephemeris_->position(Body::Earth, t);
        env.has_earth = true;
    }
    if (need_sun) {
        env.sun = ephemeris_->position(Body::Sun, t);
        env.has_sun = true;
    }
    if (j2 != 0.0) env.moon_pi = ephemeris_->moon_orientation(t).matrix;
    return env;
}

Vec3 DynamicsModel::point_mass(const Vec3& r) const {
    const double rn = r.norm();
    return -mu_moon / (rn * rn * rn) * r;
}

Vec3 DynamicsModel::j2_acceleration(const Mat3& moon_pi, const Vec3& r) const {
    const Vec3 p = moon_pi * r;
    const double r2 = p.squaredNorm();
    const double rn = std::sqrt(r2);
    const double k = -1.5 * mu_moon * j2 * moon_radius_km * moon_radius_km / (r2 * r2 * rn);
    const double zr = 5.0 * p.z() * p.z() / r2;
    const Vec3 ap(k * (1.0 - zr) * p.x(), k * (1.0 - zr) * p.y(), k * (3.0 - zr) * p.z());
    return moon_pi.transpose() * ap;
}

Vec3 DynamicsModel::third_body(double mu, const Vec3& d, const Vec3& r) const {
    const Vec3 rho = r - d;
    const double rr = rho.norm();
    const double dn = d.norm();
    return -mu * (rho / (rr * rr * rr) + d / (dn * dn * dn));
}

Vec3 DynamicsModel::srp_acceleration(const ForceEnvironment& env, const Vec3& r) const {
    const Vec3 rs = r - env.sun;
    const double rsn = rs.norm();
    const double ratio = (env.earth - env.sun).norm() / rsn;
    // kN/km^2 * m^2/kg = 1e-6 km/s^2
    const double mag = srp.pressure_kn_km2 * ratio * ratio * srp.cr * srp.area_to_mass_m2_kg * 1e-6;
    return mag * rs / rsn;
}

Vec3 DynamicsModel::acceleration(const ForceEnvironment& env, const Vec3& r) const {
    const double rn = r.norm();
    if (rn < 1e-6) throw Error(ErrorCode::SingularRadius, "spacecraft at the Moon's center");
    Vec3 a = point_mass(r);
    if (j2 != 0.0) a += j2_acceleration(env.moon_pi, r);
    if (earth_enabled) a += third_body(mu_earth, env.earth, r);
    if (sun_enabled) a += third_body(mu_sun, env.sun, r);
    if (srp.enabled) a += srp_acceleration(env, r);
    return a;
}

Vec3 DynamicsModel::acceleration(Epoch t, const Vec3& r) const {
    return acceleration(environment(t), r);
}

namespace {

Mat3 point_gradient(double mu, const Vec3& rho) {
    const double r2 = rho.squaredNorm();
    const double rn = std::sqrt(r2);
    const double r3 = r2 * rn;
    return -mu / r3 * (Mat3::Identity() - 3.0 / r2 * rho * rho.transpose());
}

}  // namespace

Mat3 DynamicsModel::gradient(const ForceEnvironment& env, const Vec3& r) const {
    Mat3 g = point_gradient(mu_moon, r);
    if (earth_enabled) g += point_gradient(mu_earth, r - env.earth);
    if (sun_enabled) g += point_gradient(mu_sun, r - env.sun);

    if (j2 != 0.0) {
        const Vec3 p = env.moon_pi * r;
        const double x = p.x(), y = p.y(), z = p.z();
        const double r2 = p.squaredNorm();
        const double rn = std::sqrt(r2);
        const double r5 = r2 * r2 * rn, r7 = r5 * r2, r9 = r7 * r2;
        const double k = -1.5 * mu_moon * j2 * moon_radius_km * moon_radius_km;
        const double f = 1.0 / r5 - 5.0 * z * z / r7;
        const double h = 3.0 / r5 - 5.0 * z * z / r7;

        Vec3 df, dh;
        for (int j = 0; j < 3; ++j) {
            const double common = 35.0 * z * z * p[j] / r9 - (j == 2 ? 10.0 * z / r7 : 0.0);
            df[j] = -5.0 * p[j] / r7 + common;
            dh[j] = -15.0 * p[j] / r7 + common;
        }
        Mat3 gp;
        for (int j = 0; j < 3; ++j) {
            gp(0, j) = k * ((j == 0 ? f : 0.0) + x * df[j]);
            gp(1, j) = k * ((j == 1 ? f : 0.0) + y * df[j]);
            gp(2, j) = k * ((j == 2 ? h : 0.0) + z * dh[j]);
        }
        g += env.moon_pi.transpose() * gp * env.moon_pi;
    }
    return g;
}

std::string DynamicsModel::descriptor() const {
    return fmt::format(
        "muM={:.12g};J2={:.12g};R={:.12g};earth={}:{:.12g};sun={}:{:.12g};srp={}:{:.12g}:{:.12g}:{:.12g};{}",
        mu_moon, j2, moon_radius_km, earth_enabled ? 1 : 0, mu_earth, sun_enabled ? 1 : 0, mu_sun,
        srp.enabled ? 1 : 0, srp.cr, srp.area_to_mass_m2_kg, srp.pressure_kn_km2,
        ephemeris_->descriptor());
}

}  // namespace nrhonav
