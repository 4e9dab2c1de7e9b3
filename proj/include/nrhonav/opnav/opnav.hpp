#pragma once

/**
 * @file opnav.hpp
 * @brief Horizon-based optical navigation: limb synthesis, the Christian-Robinson
 *        position solution and its analytical covariance.
 *
 * Attitude convention: `p_from_c` maps camera-frame vectors into the Moon
 * principal-axes frame. The camera boresight is +z_C.
 */

#include "nrhonav/core/random.hpp"
#include "nrhonav/core/types.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

namespace nrhonav {

struct CameraModel {
    double focal_length_mm = 360.0;
    double sensor_width_mm = 100.0;
    double sensor_height_mm = 100.0;
    int pixels_u = 1024;
    int pixels_v = 1024;
    double sigma_pix = 0.5;                                   ///< pixels
    double sigma_phi_rad = 15.0 * 4.84813681109536e-6;        ///< 15 arcsec

    [[nodiscard]] double pixel_pitch_mm() const { return sensor_width_mm / pixels_u; }
    /// Pixels per radian near the boresight.
    [[nodiscard]] double pixels_per_radian() const { return focal_length_mm / pixel_pitch_mm(); }
    [[nodiscard]] double fov_deg() const;
    [[nodiscard]] Mat3 calibration() const;
    [[nodiscard]] Mat3 calibration_inverse() const;
    [[nodiscard]] bool in_sensor(const Eigen::Vector2d& px) const;

    void validate() const;
};

/// Field of view [deg] of a lens of focal length f over a sensor of width w (same units).
double fov_from_focal_length(double focal_length_mm, double sensor_width_mm);

struct BodyShape {
    double a = 1738.0, b = 1738.0, c = 1736.0;

    static BodyShape sphere(double r) { return {r, r, r}; }
    static BodyShape moon() { return {}; }

    [[nodiscard]] Mat3 Q() const { return Eigen::Vector3d(1.0 / a, 1.0 / b, 1.0 / c).asDiagonal(); }
    [[nodiscard]] Mat3 Q_inverse() const { return Eigen::Vector3d(a, b, c).asDiagonal(); }
    [[nodiscard]] double max_radius() const { return std::max({a, b, c}); }
    [[nodiscard]] double mean_radius() const { return (a + b + c) / 3.0; }
};

struct LimbObservation {
    std::vector<Eigen::Vector2d> pixels;
    Mat3 p_from_c = Mat3::Identity();  ///< believed attitude
    Epoch epoch;
    int requested = 0;                  ///< points requested before sensor clipping
};

struct PositionMeasurement {
    Vec3 r_p = Vec3::Zero();        ///< position of the camera relative to the body, frame P [km]
    Mat3 cov_p = Mat3::Zero();      ///< covariance [km^2]
    int m = 0;
    Epoch epoch;
    Vec3 n = Vec3::Zero();          ///< least-squares solution, kept for the covariance
    Vec3 r_c = Vec3::Zero();        ///< estimate expressed in C
};

struct SynthesisOptions {
    double sector_deg = 140.0;
    int m_requested = 100;
    /// Unit vector from the body toward the Sun, frame P. The sector is centred
    /// on the limb point nearest to this direction in the image.
    Vec3 sun_direction_p = Vec3::UnitX();
    /// When true the sector is centred away from the Sun instead.
    bool center_anti_sun = false;
};

/**
 * Generates noisy limb pixels for a camera at `r_c` (camera position relative
 * to the body, expressed in C) using the true attitude `true_p_from_c`.
 * Throws RangeTooClose or BodyNotInFrame.
 */
LimbObservation synthesize_limb_points(const CameraModel& cam, const BodyShape& shape, const Vec3& r_c,
                                       const Mat3& true_p_from_c, const Mat3& believed_p_from_c,
                                       const SynthesisOptions& opt, RandomStream* rng);

/// Estimate only (covariance left zero). Throws RankDeficient or NotOutsideBody.
PositionMeasurement solve_position(const CameraModel& cam, const BodyShape& shape, const LimbObservation& obs);

/// Analytical covariance of the estimate under pixel and attitude noise.
Mat3 measurement_covariance(const CameraModel& cam, const BodyShape& shape, const LimbObservation& obs,
                            const Vec3& n, const Vec3& r_c);

/// Convenience: solve and attach the covariance.
PositionMeasurement process_limb(const CameraModel& cam, const BodyShape& shape, const LimbObservation& obs);

/// Limb point count for a given apparent size: clamp(round(rho * arc_pixels), m_min, m_max).
int limb_point_count(const CameraModel& cam, const BodyShape& shape, double range_km, double sector_deg,
                     double density = 0.25, int m_min = 10, int m_max = 200);

/// Apparent angular diameter [rad] of a sphere of radius R at distance d.
double apparent_diameter(double radius_km, double range_km);

/// Camera attitude whose boresight points from `r_p` toward the body centre.
/// The roll about the boresight is fixed by `up_p`.
Mat3 point_at_body(const Vec3& r_p, const Vec3& up_p = Vec3::UnitZ());

struct ValidationConfig {
    CameraModel camera;
    BodyShape shape = BodyShape::moon();
    double range_km = 70000.0;
    int m = 100;
    double sector_deg = 140.0;
    int trials = 10000;
    std::uint64_t seed = 1;
    int workers = 1;
};

struct ValidationTrial {
    Vec3 error_p = Vec3::Zero();
    double mahalanobis2 = 0.0;
    double range_axis_z = 0.0;   ///< error along the major covariance axis, in predicted sigmas
    bool skipped = false;
};

struct ValidationResult {
    std::array<double, 3> fractions{};      ///< within 1, 2, 3 sigma
    std::array<double, 3> thresholds{};     ///< chi-square(3) quantiles used
    /// One-dimensional containment along the major (line-of-sight) covariance axis.
    std::array<double, 3> range_axis_fractions{};
    int used_trials = 0;
    int skipped_trials = 0;
    Mat3 empirical_covariance = Mat3::Zero();
    Mat3 example_covariance = Mat3::Zero();
    std::vector<ValidationTrial> trials;
};

/// Squared-Mahalanobis thresholds of a 3-D Gaussian holding the 1/2/3-sigma
/// one-dimensional probabilities.
std::array<double, 3> chi2_3dof_thresholds();

ValidationResult validate_covariance_montecarlo(const ValidationConfig& cfg);

}  // namespace nrhonav
