#include "nrhonav/frames/anomaly.hpp"

#include "nrhonav/core/constants.hpp"
#include "nrhonav/core/error.hpp"

#include <cmath>

namespace nrhonav {

double wrap_deg_360(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w < 0) w += 360.0;
    if (w >= 360.0) w -= 360.0;
    return w;
}

double wrap_deg_180(double deg) {
    double w = wrap_deg_360(deg);
    if (w > 180.0) w -= 360.0;
    return w;
}

double osculating_true_anomaly(const Vec3& r, const Vec3& v, double mu) {
    const Vec3 h = r.cross(v);
    const double rn = r.norm();
    if (rn == 0.0 || h.norm() < 1e-10 * rn * v.norm() || h.norm() == 0.0) {
        throw Error(ErrorCode::DegenerateOrbit, "angular momentum vanishes");
    }
    const Vec3 e = v.cross(h) / mu - r / rn;
    const Vec3 hhat = h.normalized();

    Vec3 ref;
    if (e.norm() > kCircularEccentricity) {
        ref = e.normalized();
    } else {
        const Vec3 node = Vec3::UnitZ().cross(hhat);
        ref = node.norm() > 1e-12 ? node.normalized() : Vec3::UnitX();
    }
    const double c = ref.dot(r);
    const double s = hhat.dot(ref.cross(r));
    return wrap_deg_360(std::atan2(s, c) * constants::kRadToDeg);
}

double osculating_true_anomaly(const StateVector& s, double mu) {
    return osculating_true_anomaly(s.r, s.v, mu);
}

}  // namespace nrhonav
