#pragma once

/**
 * @file filters.hpp
 * @brief EKF/UKF prediction and the linear position update.
 *
 * The covariance inside FilterState is held in canonical units (length 3000 km,
 * time 2346.71 s) so position and velocity blocks have comparable magnitudes.
 * Means, measurements and measurement covariances cross the API in km and km/s.
 */

#include "nrhonav/core/state.hpp"
#include "nrhonav/dynamics/propagator.hpp"
#include "nrhonav/opnav/opnav.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace nrhonav {

/// Diagonal scaling from canonical to physical units for a 6-state.
Vec6 canonical_scale();

struct FilterState {
    StateVector mean;
    Mat6 sigma = Mat6::Identity();  ///< canonical units

    FilterState() = default;
    FilterState(const StateVector& m, const Mat6& sigma_canonical) : mean(m), sigma(sigma_canonical) {}

    static FilterState from_physical(const StateVector& m, const Mat6& cov_km);

    [[nodiscard]] Epoch epoch() const { return mean.epoch; }
    [[nodiscard]] Mat6 covariance_physical() const;
    /// Square roots of the diagonal, km and km/s.
    [[nodiscard]] Vec6 std_physical() const;
};

struct ProcessNoiseConfig {
    double sigma_u = 1e-8;  ///< canonical diffusion coefficient (LU/TU^1.5)

    void validate() const;
};

/// Q over an interval of h canonical time units.
Mat6 process_noise(double sigma_u, double h_canonical);

struct UtConfig {
    double alpha = 1.0;
    double kappa = 0.0;
    double beta = 2.0;
    /// Use lambda / (n + lambda + 1 - alpha^2 + beta) for the zeroth covariance weight.
    bool literal_w0c = false;

    static constexpr int n = 6;

    [[nodiscard]] double lambda() const { return alpha * alpha * (n + kappa) - n; }
    [[nodiscard]] std::vector<double> mean_weights() const;
    [[nodiscard]] std::vector<double> cov_weights() const;
    void validate() const;
};

/// 2n+1 sigma points (physical units) about the filter mean.
std::vector<StateVector> sigma_points(const FilterState& fs, const UtConfig& ut);

FilterState ekf_predict(const Propagator& prop, const ProcessNoiseConfig& pn, const FilterState& fs, Epoch t1);
FilterState ukf_predict(const Propagator& prop, const ProcessNoiseConfig& pn, const UtConfig& ut,
                        const FilterState& fs, Epoch t1);

struct UpdateOptions {
    /// Reject the update when the innovation's squared Mahalanobis distance exceeds this.
    std::optional<double> gate_chi2;
};

/// Joseph-form update with a direct position measurement y (frame I, km), covariance R (km^2).
FilterState measurement_update(const FilterState& fs, const Vec3& y_km, const Mat3& r_km2,
                               const UpdateOptions& opt = {});

/// Rotates a P-frame measurement and its covariance into frame I at epoch t.
std::pair<Vec3, Mat3> rotate_measurement_to_inertial(const PositionMeasurement& meas,
                                                     const EphemerisProvider& eph, Epoch t);

/// Lower Cholesky factor or CholeskyFailure.
Mat6 cholesky_lower(const Mat6& m);

}  // namespace nrhonav
