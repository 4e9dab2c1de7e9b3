#pragma once

/**
 * @file types.hpp
 * @brief Linear-algebra aliases, the epoch type and frame-tagged vectors.
 */

#include <Eigen/Dense>

#include <compare>

namespace nrhonav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Seconds past a fixed reference epoch on a single continuous time scale.
class Epoch {
public:
    constexpr Epoch() = default;
    constexpr explicit Epoch(double seconds) : seconds_(seconds) {}

    [[nodiscard]] constexpr double seconds() const { return seconds_; }

    constexpr Epoch operator+(double dt) const { return Epoch(seconds_ + dt); }
    constexpr Epoch operator-(double dt) const { return Epoch(seconds_ - dt); }
    constexpr double operator-(Epoch other) const { return seconds_ - other.seconds_; }
    constexpr Epoch& operator+=(double dt) {
        seconds_ += dt;
        return *this;
    }

    constexpr auto operator<=>(const Epoch&) const = default;

private:
    double seconds_ = 0.0;
};

/**
 * Reference frames used across the toolkit.
 *
 * I  : Moon-centered inertial
 * EM : Earth-Moon rotating, Moon-centered, x from Earth toward Moon
 * P  : Moon principal axes
 * C  : camera (boresight +z)
 */
enum class Frame { I, EM, P, C };

constexpr const char* frame_name(Frame f) {
    switch (f) {
        case Frame::I: return "I";
        case Frame::EM: return "EM";
        case Frame::P: return "P";
        case Frame::C: return "C";
    }
    return "?";
}

/// A 3-vector expressed in frame F. Mixing frames does not compile.
template <Frame F>
struct Vector3In {
    Vec3 value = Vec3::Zero();

    Vector3In() = default;
    explicit Vector3In(const Vec3& v) : value(v) {}

    static constexpr Frame frame = F;

    Vector3In operator+(const Vector3In& o) const { return Vector3In(value + o.value); }
    Vector3In operator-(const Vector3In& o) const { return Vector3In(value - o.value); }
    Vector3In operator*(double s) const { return Vector3In(value * s); }
    [[nodiscard]] double norm() const { return value.norm(); }
    [[nodiscard]] double dot(const Vector3In& o) const { return value.dot(o.value); }
};

/// A symmetric 3x3 covariance expressed in frame F.
template <Frame F>
struct Covariance3In {
    Mat3 value = Mat3::Zero();

    Covariance3In() = default;
    explicit Covariance3In(const Mat3& m) : value(m) {}

    static constexpr Frame frame = F;
};

/// Proper rotation mapping vectors expressed in `From` into `To`.
template <Frame To, Frame From>
struct Rotation {
    Mat3 matrix = Mat3::Identity();

    Rotation() = default;
    explicit Rotation(const Mat3& m) : matrix(m) {}

    Vector3In<To> operator*(const Vector3In<From>& v) const {
        return Vector3In<To>(matrix * v.value);
    }
    Covariance3In<To> operator*(const Covariance3In<From>& c) const {
        return Covariance3In<To>(matrix * c.value * matrix.transpose());
    }
    template <Frame Inner>
    Rotation<To, Inner> operator*(const Rotation<From, Inner>& other) const {
        return Rotation<To, Inner>(matrix * other.matrix);
    }
    [[nodiscard]] Rotation<From, To> inverse() const {
        return Rotation<From, To>(matrix.transpose());
    }
};

/// Skew-symmetric matrix such that skew(a) * b == a.cross(b).
inline Mat3 skew(const Vec3& a) {
    Mat3 m;
    m << 0.0, -a.z(), a.y(),
         a.z(), 0.0, -a.x(),
         -a.y(), a.x(), 0.0;
    return m;
}

/// Rodrigues rotation matrix for angle `angle` about unit axis `axis`.
inline Mat3 rodrigues(const Vec3& axis, double angle) {
    const Vec3 i = axis.normalized();
    return std::cos(angle) * Mat3::Identity() + std::sin(angle) * skew(i) +
           (1.0 - std::cos(angle)) * i * i.transpose();
}

}  // namespace nrhonav
