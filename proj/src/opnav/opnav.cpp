#include "nrhonav/opnav/opnav.hpp"

#include "nrhonav/core/constants.hpp"
#include "nrhonav/core/error.hpp"
#include "nrhonav/core/parallel.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>

namespace nrhonav {

double fov_from_focal_length(double focal_length_mm, double sensor_width_mm) {
    if (!(focal_length_mm > 0)) throw Error(ErrorCode::InvalidArgument, "focal length must be positive");
    return 2.0 * std::atan(sensor_width_mm / (2.0 * focal_length_mm)) * constants::kRadToDeg;
}

double CameraModel::fov_deg() const { return fov_from_focal_length(focal_length_mm, sensor_width_mm); }

Mat3 CameraModel::calibration() const {
    const double fx = focal_length_mm / (sensor_width_mm / pixels_u);
    const double fy = focal_length_mm / (sensor_height_mm / pixels_v);
    Mat3 k;
    k << fx, 0.0, 0.5 * pixels_u, 0.0, fy, 0.5 * pixels_v, 0.0, 0.0, 1.0;
    return k;
}

Mat3 CameraModel::calibration_inverse() const { return calibration().inverse(); }

bool CameraModel::in_sensor(const Eigen::Vector2d& px) const {
    return px.x() >= 0.0 && px.x() <= pixels_u && px.y() >= 0.0 && px.y() <= pixels_v;
}

void CameraModel::validate() const {
    if (!(focal_length_mm > 0 && sensor_width_mm > 0 && sensor_height_mm > 0 && pixels_u > 0 && pixels_v > 0 &&
          sigma_pix >= 0 && sigma_phi_rad >= 0)) {
        throw Error(ErrorCode::InvalidArgument, "invalid camera model");
    }
}

double apparent_diameter(double radius_km, double range_km) { return 2.0 * std::asin(radius_km / range_km); }

int limb_point_count(const CameraModel& cam, const BodyShape& shape, double range_km, double sector_deg,
                     double density, int m_min, int m_max) {
    const double d_pix = apparent_diameter(shape.mean_radius(), range_km) * cam.pixels_per_radian();
    const double arc = sector_deg / 360.0 * constants::kPi * d_pix;
    const long m = std::lround(density * arc);
    return static_cast<int>(std::clamp<long>(m, m_min, m_max));
}

Mat3 point_at_body(const Vec3& r_p, const Vec3& up_p) {
    const Vec3 z = -r_p.normalized();
    Vec3 x = up_p.cross(z);
    if (x.norm() < 1e-8) x = Vec3::UnitX().cross(z);
    if (x.norm() < 1e-8) x = Vec3::UnitY().cross(z);
    x.normalize();
    const Vec3 y = z.cross(x);
    Mat3 m;
    m.col(0) = x;
    m.col(1) = y;
    m.col(2) = z;
    return m;
}

namespace {

/// Pixel of a P-frame direction seen from the camera. Returns false when behind.
bool project(const Mat3& K, const Mat3& c_from_p, const Vec3& dir_p, Eigen::Vector2d& px) {
    const Vec3 d = c_from_p * dir_p;
    if (d.z() <= 0.0) return false;
    const Vec3 h = K * (d / d.z());
    px = h.head<2>();
    return true;
}

}  // namespace

LimbObservation synthesize_limb_points(const CameraModel& cam, const BodyShape& shape, const Vec3& r_c,
                                       const Mat3& true_p_from_c, const Mat3& believed_p_from_c,
                                       const SynthesisOptions& opt, RandomStream* rng) {
    const Vec3 r_p = true_p_from_c * r_c;
    if (r_p.norm() <= shape.max_radius()) throw Error(ErrorCode::RangeTooClose, "camera inside the body's bounding sphere");
    const Vec3 c = shape.Q() * r_p;
    const double cn = c.norm();
    if (cn <= 1.0) throw Error(ErrorCode::RangeTooClose, "camera not outside the body");

    const Vec3 chat = c / cn;
    const double sin_a = 1.0 / cn;
    const double cos_a = std::sqrt(cn * cn - 1.0) / cn;

    Vec3 toward = shape.Q() * opt.sun_direction_p;
    Vec3 e1 = toward - toward.dot(chat) * chat;
    if (e1.norm() < 1e-9) {
        e1 = Vec3::UnitX() - chat.x() * chat;
        if (e1.norm() < 1e-9) e1 = Vec3::UnitY() - chat.y() * chat;
    }
    e1.normalize();
    if (opt.center_anti_sun) e1 = -e1;
    const Vec3 e2 = chat.cross(e1);

    const Mat3 K = cam.calibration();
    const Mat3 c_from_p = true_p_from_c.transpose();
    const Mat3 Qinv = shape.Q_inverse();
    auto limb_dir = [&](double psi) {
        return Vec3(Qinv * (cos_a * (-chat) + sin_a * (std::cos(psi) * e1 + std::sin(psi) * e2)));
    };

    // The whole disk must fit in the frame.
    constexpr int kRing = 72;
    for (int i = 0; i < kRing; ++i) {
        Eigen::Vector2d px;
        if (!project(K, c_from_p, limb_dir(2.0 * constants::kPi * i / kRing), px) || !cam.in_sensor(px)) {
            throw Error(ErrorCode::BodyNotInFrame, "limb leaves the sensor");
        }
    }

    const int m = opt.m_requested;
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "limb point count must be positive");
    const double sector = opt.sector_deg * constants::kDegToRad;
    const bool full = opt.sector_deg >= 360.0 - 1e-12;

    LimbObservation obs;
    obs.p_from_c = believed_p_from_c;
    obs.requested = m;
    obs.pixels.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        double psi;
        if (full) {
            psi = 2.0 * constants::kPi * i / m;
        } else {
            psi = m == 1 ? 0.0 : -0.5 * sector + sector * i / (m - 1);
        }
        Eigen::Vector2d px;
        if (!project(K, c_from_p, limb_dir(psi), px)) throw Error(ErrorCode::BodyNotInFrame, "body behind camera");
        if (rng && cam.sigma_pix > 0) {
            const double du = rng->normal(cam.sigma_pix);
            const double dv = rng->normal(cam.sigma_pix);
            px += Eigen::Vector2d(du, dv);
        }
        if (cam.in_sensor(px)) obs.pixels.push_back(px);
    }
    return obs;
}

namespace {

struct LimbGeometry {
    Eigen::MatrixX3d H;
    std::vector<double> sbar_norm;
};

LimbGeometry limb_geometry(const CameraModel& cam, const BodyShape& shape, const LimbObservation& obs) {
    const Mat3 Kinv = cam.calibration_inverse();
    const Mat3 M = shape.Q() * obs.p_from_c;
    const auto m = static_cast<Eigen::Index>(obs.pixels.size());
    LimbGeometry g;
    g.H.resize(m, 3);
    g.sbar_norm.resize(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& px = obs.pixels[static_cast<std::size_t>(i)];
        const Vec3 s = Kinv * Vec3(px.x(), px.y(), 1.0);
        const Vec3 sbar = M * s;
        const double nrm = sbar.norm();
        g.sbar_norm[static_cast<std::size_t>(i)] = nrm;
        g.H.row(i) = (sbar / nrm).transpose();
    }
    return g;
}

}  // namespace

PositionMeasurement solve_position(const CameraModel& cam, const BodyShape& shape, const LimbObservation& obs) {
    if (obs.pixels.size() < 3) throw Error(ErrorCode::RankDeficient, "fewer than three limb points");
    const LimbGeometry g = limb_geometry(cam, shape, obs);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(g.H), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (!(sv[2] > 1e-12 * sv[0])) throw Error(ErrorCode::RankDeficient, "limb directions do not span 3-D");
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(g.H.rows());
    const Vec3 n = svd.solve(ones);
    const double nn = n.squaredNorm() - 1.0;
    if (!(nn > 0.0)) throw Error(ErrorCode::NotOutsideBody, "n'n <= 1");

    PositionMeasurement out;
    out.n = n;
    out.r_p = -shape.Q_inverse() * n / std::sqrt(nn);
    out.r_c = obs.p_from_c.transpose() * out.r_p;
    out.m = static_cast<int>(obs.pixels.size());
    out.epoch = obs.epoch;
    return out;
}

Mat3 measurement_covariance(const CameraModel& cam, const BodyShape& shape, const LimbObservation& obs,
                            const Vec3& n, const Vec3& r_c) {
    const double nn = n.squaredNorm() - 1.0;
    if (!(nn > 0.0)) throw Error(ErrorCode::NotOutsideBody, "n'n <= 1");
    if (obs.pixels.size() < 3) throw Error(ErrorCode::RankDeficient, "fewer than three limb points");
    const LimbGeometry g = limb_geometry(cam, shape, obs);

    const double dx = cam.pixels_per_radian();
    const double var_s = (cam.sigma_pix / dx) * (cam.sigma_pix / dx);
    const Mat3 Rs = Eigen::Vector3d(var_s, var_s, 0.0).asDiagonal();
    const Mat3 M = shape.Q() * obs.p_from_c;
    const Mat3 Rsbar = M * Rs * M.transpose();

    Mat3 info = Mat3::Zero();
    for (Eigen::Index i = 0; i < g.H.rows(); ++i) {
        const Vec3 sp = g.H.row(i).transpose();
        const Eigen::RowVector3d J =
            n.transpose() * (Mat3::Identity() - sp * sp.transpose()) / g.sbar_norm[static_cast<std::size_t>(i)];
        const double var_y = J * Rsbar * J.transpose();
        if (var_y > 0.0) info += sp * sp.transpose() / var_y;
    }

    Mat3 cov = Mat3::Zero();
    if (var_s > 0.0) {
        Eigen::FullPivLU<Mat3> lu(info);
        if (!lu.isInvertible()) throw Error(ErrorCode::RankDeficient, "singular limb information matrix");
        const Mat3 Pn = lu.inverse();
        const Mat3 F = -shape.Q_inverse() * (Mat3::Identity() - n * n.transpose() / nn) / std::sqrt(nn);
        cov += F * Pn * F.transpose();
    }
    const Mat3 G = obs.p_from_c * skew(r_c);
    cov += cam.sigma_phi_rad * cam.sigma_phi_rad * G * G.transpose();
    return 0.5 * (cov + cov.transpose());
}

PositionMeasurement process_limb(const CameraModel& cam, const BodyShape& shape, const LimbObservation& obs) {
    PositionMeasurement meas = solve_position(cam, shape, obs);
    meas.cov_p = measurement_covariance(cam, shape, obs, meas.n, meas.r_c);
    return meas;
}

std::array<double, 3> chi2_3dof_thresholds() {
    boost::math::chi_squared_distribution<double> chi2(3.0);
    std::array<double, 3> t{};
    for (int k = 1; k <= 3; ++k) {
        const double p = std::erf(k / std::sqrt(2.0));
        t[static_cast<std::size_t>(k - 1)] = boost::math::quantile(chi2, p);
    }
    return t;
}

ValidationResult validate_covariance_montecarlo(const ValidationConfig& cfg) {
    if (cfg.trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
    cfg.camera.validate();
    ValidationResult res;
    res.thresholds = chi2_3dof_thresholds();
    res.trials.resize(static_cast<std::size_t>(cfg.trials));
    std::vector<Mat3> covariances(static_cast<std::size_t>(cfg.trials), Mat3::Zero());

    const bool degenerate = cfg.camera.sigma_pix == 0.0 && cfg.camera.sigma_phi_rad == 0.0;

    parallel_for(static_cast<std::size_t>(cfg.trials), cfg.workers, [&](std::size_t i) {
        RandomStream rng(cfg.seed, {static_cast<std::uint64_t>(Substream::Validation), i});
        const Mat3 believed = rng.rotation();
        Vec3 axis;
        do {
            const double ax = rng.uniform(-1.0, 1.0);
            const double ay = rng.uniform(-1.0, 1.0);
            const double az = rng.uniform(-1.0, 1.0);
            axis = Vec3(ax, ay, az);
        } while (axis.norm() < 1e-12);
        const double dphi = rng.normal(cfg.camera.sigma_phi_rad);
        const Mat3 dT = rodrigues(axis.normalized(), dphi);
        const Mat3 truth = dT * believed;
        const Vec3 r_c(0.0, 0.0, -cfg.range_km);
        const Vec3 r_p = truth * r_c;

        SynthesisOptions opt;
        opt.sector_deg = cfg.sector_deg;
        opt.m_requested = cfg.m;
        opt.sun_direction_p = rng.unit_vector();
        const LimbObservation obs = synthesize_limb_points(cfg.camera, cfg.shape, r_c, truth, believed, opt, &rng);
        const PositionMeasurement meas = process_limb(cfg.camera, cfg.shape, obs);

        ValidationTrial& t = res.trials[i];
        t.error_p = meas.r_p - r_p;
        covariances[i] = meas.cov_p;
        if (degenerate) {
            t.skipped = true;
            return;
        }
        t.mahalanobis2 = t.error_p.dot(meas.cov_p.ldlt().solve(t.error_p));
        const Eigen::SelfAdjointEigenSolver<Mat3> es(meas.cov_p);
        t.range_axis_z = t.error_p.dot(es.eigenvectors().col(2)) / std::sqrt(es.eigenvalues()[2]);
    });

    std::array<int, 3> inside{};
    std::array<int, 3> inside_axis{};
    Vec3 mean = Vec3::Zero();
    for (const auto& t : res.trials) {
        if (t.skipped) {
            ++res.skipped_trials;
            continue;
        }
        ++res.used_trials;
        mean += t.error_p;
        for (std::size_t k = 0; k < 3; ++k) {
            if (t.mahalanobis2 <= res.thresholds[k]) ++inside[k];
            if (std::abs(t.range_axis_z) <= static_cast<double>(k + 1)) ++inside_axis[k];
        }
    }
    if (res.used_trials > 0) {
        mean /= res.used_trials;
        for (const auto& t : res.trials) {
            if (t.skipped) continue;
            const Vec3 d = t.error_p - mean;
            res.empirical_covariance += d * d.transpose();
        }
        if (res.used_trials > 1) res.empirical_covariance /= (res.used_trials - 1);
        for (std::size_t k = 0; k < 3; ++k) {
            res.fractions[k] = static_cast<double>(inside[k]) / res.used_trials;
            res.range_axis_fractions[k] = static_cast<double>(inside_axis[k]) / res.used_trials;
        }
    }
    res.example_covariance = covariances.front();
    return res;
}

}  // namespace nrhonav
