#pragma once

#include "nrhonav/core/types.hpp"

namespace nrhonav {

/// Spacecraft position [km] and velocity [km/s] in frame I at an epoch.
struct StateVector {
    Epoch epoch;
    Vec3 r = Vec3::Zero();
    Vec3 v = Vec3::Zero();

    StateVector() = default;
    StateVector(Epoch t, const Vec3& r_, const Vec3& v_) : epoch(t), r(r_), v(v_) {}
    StateVector(Epoch t, const Vec6& x) : epoch(t), r(x.head<3>()), v(x.tail<3>()) {}

    [[nodiscard]] Vec6 vector() const {
        Vec6 x;
        x << r, v;
        return x;
    }
};

}  // namespace nrhonav
