#include "nrhonav/filters/filters.hpp"

#include "nrhonav/core/constants.hpp"
#include "nrhonav/core/error.hpp"

#include <cmath>

namespace nrhonav {

using constants::kLengthUnitKm;
using constants::kTimeUnitS;
using constants::kVelocityUnitKmS;

Vec6 canonical_scale() {
    Vec6 d;
    d << kLengthUnitKm, kLengthUnitKm, kLengthUnitKm, kVelocityUnitKmS, kVelocityUnitKmS, kVelocityUnitKmS;
    return d;
}

FilterState FilterState::from_physical(const StateVector& m, const Mat6& cov_km) {
    const Vec6 inv = canonical_scale().cwiseInverse();
    return {m, inv.asDiagonal() * cov_km * inv.asDiagonal()};
}

Mat6 FilterState::covariance_physical() const {
    const Vec6 d = canonical_scale();
    return d.asDiagonal() * sigma * d.asDiagonal();
}

Vec6 FilterState::std_physical() const {
    return sigma.diagonal().cwiseMax(0.0).cwiseSqrt().cwiseProduct(canonical_scale());
}

void ProcessNoiseConfig::validate() const {
    if (!(sigma_u >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma_u must be >= 0");
}

Mat6 process_noise(double sigma_u, double h) {
    const double q = sigma_u * sigma_u;
    Mat6 Q = Mat6::Zero();
    const Mat3 I = Mat3::Identity();
    Q.topLeftCorner<3, 3>() = q * h * h * h / 3.0 * I;
    Q.topRightCorner<3, 3>() = q * h * h / 2.0 * I;
    Q.bottomLeftCorner<3, 3>() = q * h * h / 2.0 * I;
    Q.bottomRightCorner<3, 3>() = q * h * I;
    return Q;
}

void UtConfig::validate() const {
    if (!(n + lambda() > 0.0)) throw Error(ErrorCode::InvalidArgument, "unscented transform needs n + lambda > 0");
}

std::vector<double> UtConfig::mean_weights() const {
    const double lam = lambda();
    std::vector<double> w(2 * n + 1, 1.0 / (2.0 * (n + lam)));
    w[0] = lam / (n + lam);
    return w;
}

std::vector<double> UtConfig::cov_weights() const {
    const double lam = lambda();
    std::vector<double> w(2 * n + 1, 1.0 / (2.0 * (n + lam)));
    const double extra = 1.0 - alpha * alpha + beta;
    w[0] = literal_w0c ? lam / (n + lam + extra) : lam / (n + lam) + extra;
    return w;
}

Mat6 cholesky_lower(const Mat6& m) {
    Eigen::LLT<Mat6> llt(0.5 * (m + m.transpose()));
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::CholeskyFailure, "covariance is not positive definite");
    return llt.matrixL();
}

std::vector<StateVector> sigma_points(const FilterState& fs, const UtConfig& ut) {
    ut.validate();
    const Mat6 L = cholesky_lower(fs.sigma);
    const double c = std::sqrt(UtConfig::n + ut.lambda());
    const Vec6 d = canonical_scale();
    const Vec6 x0 = fs.mean.vector();
    std::vector<StateVector> pts;
    pts.reserve(2 * UtConfig::n + 1);
    pts.emplace_back(fs.mean);
    for (int sign : {1, -1}) {
        for (int l = 0; l < UtConfig::n; ++l) {
            const Vec6 dx = (sign * c) * L.col(l).cwiseProduct(d);
            pts.emplace_back(fs.epoch(), Vec6(x0 + dx));
        }
    }
    return pts;
}

FilterState ekf_predict(const Propagator& prop, const ProcessNoiseConfig& pn, const FilterState& fs, Epoch t1) {
    pn.validate();
    const double h = t1 - fs.epoch();
    if (h < 0.0) throw Error(ErrorCode::InvalidArgument, "prediction must go forward in time");
    if (h == 0.0) return fs;
    const auto [s1, phi] = prop.propagate_with_stm(fs.mean, t1);
    const Vec6 d = canonical_scale();
    const Mat6 phic = d.cwiseInverse().asDiagonal() * phi * d.asDiagonal();
    Mat6 sigma = phic * fs.sigma * phic.transpose() + process_noise(pn.sigma_u, h / kTimeUnitS);
    sigma = (0.5 * (sigma + sigma.transpose())).eval();
    return {s1, sigma};
}

FilterState ukf_predict(const Propagator& prop, const ProcessNoiseConfig& pn, const UtConfig& ut,
                        const FilterState& fs, Epoch t1) {
    pn.validate();
    const double h = t1 - fs.epoch();
    if (h < 0.0) throw Error(ErrorCode::InvalidArgument, "prediction must go forward in time");
    if (h == 0.0) return fs;

    const auto pts = sigma_points(fs, ut);
    const auto wm = ut.mean_weights();
    const auto wc = ut.cov_weights();
    const Vec6 dinv = canonical_scale().cwiseInverse();

    std::vector<Vec6> prop_c(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        prop_c[i] = prop.propagate(pts[i], t1).vector().cwiseProduct(dinv);
    }
    // The weights sum to one, so the mean is accumulated as offsets from the central point.
    Vec6 mean_dev = Vec6::Zero();
    for (std::size_t i = 1; i < pts.size(); ++i) mean_dev += wm[i] * (prop_c[i] - prop_c[0]);
    const Vec6 mean_c = prop_c[0] + mean_dev;

    Mat6 sigma = Mat6::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec6 e = prop_c[i] - mean_c;
        sigma += wc[i] * e * e.transpose();
    }
    sigma += process_noise(pn.sigma_u, h / kTimeUnitS);
    sigma = (0.5 * (sigma + sigma.transpose())).eval();
    return {StateVector(t1, Vec6(mean_c.cwiseProduct(canonical_scale()))), sigma};
}

FilterState measurement_update(const FilterState& fs, const Vec3& y_km, const Mat3& r_km2, const UpdateOptions& opt) {
    const double L = kLengthUnitKm;
    const Mat3 R = 0.5 * (r_km2 + r_km2.transpose()) / (L * L);
    {
        Eigen::LLT<Mat3> llt(R);
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorCode::InvalidArgument, "measurement covariance must be positive definite");
        }
    }
    Eigen::Matrix<double, 3, 6> E = Eigen::Matrix<double, 3, 6>::Zero();
    E.leftCols<3>() = Mat3::Identity();

    const Vec3 innov = (y_km - fs.mean.r) / L;
    const Mat3 S = E * fs.sigma * E.transpose() + R;
    const Eigen::LDLT<Mat3> S_ldlt(S);
    if (opt.gate_chi2) {
        const double d2 = innov.dot(S_ldlt.solve(innov));
        if (d2 > *opt.gate_chi2) throw Error(ErrorCode::InnovationGateExceeded, "innovation outside the gate");
    }
    const Eigen::Matrix<double, 6, 3> K = S_ldlt.solve(E * fs.sigma).transpose();
    const Mat6 IKE = Mat6::Identity() - K * E;
    Mat6 sigma = IKE * fs.sigma * IKE.transpose() + K * R * K.transpose();
    sigma = (0.5 * (sigma + sigma.transpose())).eval();

    const Vec6 dx = (K * innov).cwiseProduct(canonical_scale());
    return {StateVector(fs.epoch(), Vec6(fs.mean.vector() + dx)), sigma};
}

std::pair<Vec3, Mat3> rotate_measurement_to_inertial(const PositionMeasurement& meas, const EphemerisProvider& eph,
                                                     Epoch t) {
    const Mat3 i_from_p = eph.moon_orientation(t).matrix.transpose();
    Mat3 R = i_from_p * meas.cov_p * i_from_p.transpose();
    R = (0.5 * (R + R.transpose())).eval();
    return {i_from_p * meas.r_p, R};
}

}  // namespace nrhonav
