#include "nrhonav/frames/ephemeris.hpp"

#include "nrhonav/core/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nrhonav {

using constants::kDegToRad;
using constants::kPi;

const char* to_string(EphemerisMode mode) {
    switch (mode) {
        case EphemerisMode::CircularAnalytic: return "circular-analytic";
        case EphemerisMode::EnrichedAnalytic: return "enriched-analytic";
        case EphemerisMode::Table: return "table";
    }
    return "?";
}

EphemerisMode ephemeris_mode_from_string(const std::string& name) {
    if (name == "circular-analytic") return EphemerisMode::CircularAnalytic;
    if (name == "enriched-analytic") return EphemerisMode::EnrichedAnalytic;
    if (name == "table") return EphemerisMode::Table;
    throw Error(ErrorCode::ConfigError, "unknown ephemeris mode '" + name + "'");
}

AnalyticEphemerisParams AnalyticEphemerisParams::circular() { return {}; }

AnalyticEphemerisParams AnalyticEphemerisParams::enriched() {
    AnalyticEphemerisParams p;
    p.earth_sma_km = 384748.0;
    p.earth_eccentricity = constants::kEarthMoonEccentricity;
    p.sun_enabled = true;
    p.moon_pole_tilt_deg = 6.68;

    // Earth at perigee on -x at the reference epoch, so the circular and
    // enriched frames start aligned and the angular offset stays within the
    // equation of center.
    p.earth_mean_anomaly_deg = 0.0;
    p.earth_periapsis_longitude_deg = 180.0;
    return p;
}

// ---------------------------------------------------------------------------
// Hermite table

HermiteTable::HermiteTable(std::vector<TableNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "ephemeris table needs at least two nodes");
    }
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        if (!(nodes_[i].t > nodes_[i - 1].t)) {
            throw Error(ErrorCode::InvalidArgument, "ephemeris table epochs must increase strictly");
        }
    }
}

HermiteTable HermiteTable::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open ephemeris table " + path.string());
    std::vector<TableNode> nodes;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        TableNode n;
        if (!(ss >> n.t >> n.position.x() >> n.position.y() >> n.position.z() >> n.velocity.x() >>
              n.velocity.y() >> n.velocity.z())) {
            if (nodes.empty()) continue;  // header row
            throw Error(ErrorCode::IoError, "malformed ephemeris row: " + line);
        }
        nodes.push_back(n);
    }
    return HermiteTable(std::move(nodes));
}

double HermiteTable::t_begin() const { return nodes_.front().t; }
double HermiteTable::t_end() const { return nodes_.back().t; }

BodyState HermiteTable::evaluate(double t) const {
    if (nodes_.empty() || t < t_begin() || t > t_end()) {
        throw Error(ErrorCode::OutOfWindow, fmt::format("epoch {:.6f} outside ephemeris table", t));
    }
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t,
                               [](double v, const TableNode& n) { return v < n.t; });
    std::size_t i1 = static_cast<std::size_t>(std::distance(nodes_.begin(), it));
    if (i1 >= nodes_.size()) i1 = nodes_.size() - 1;
    const std::size_t i0 = i1 - 1;
    const TableNode& a = nodes_[i0];
    const TableNode& b = nodes_[i1];

    BodyState out;
    if (t == a.t) {
        out.position = a.position;
        out.velocity = a.velocity;
    } else if (t == b.t) {
        out.position = b.position;
        out.velocity = b.velocity;
    }
    const double h = b.t - a.t;
    const double s = (t - a.t) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;

    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    const double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1;
    const double d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
    const double e00 = 12 * s - 6, e10 = 6 * s - 4, e01 = -12 * s + 6, e11 = 6 * s - 2;

    if (t != a.t && t != b.t) {
        out.position = h00 * a.position + h10 * h * a.velocity + h01 * b.position + h11 * h * b.velocity;
        out.velocity = (d00 * a.position + d01 * b.position) / h + d10 * a.velocity + d11 * b.velocity;
    }
    out.acceleration =
        (e00 * a.position + e01 * b.position) / (h * h) + (e10 * a.velocity + e11 * b.velocity) / h;
    return out;
}

// ---------------------------------------------------------------------------
// Provider

namespace {

Mat3 pole_alignment_matrix(double tilt_deg, double node_deg) {
    const double i = tilt_deg * kDegToRad;
    const double w = node_deg * kDegToRad;
    const Vec3 pole(std::sin(i) * std::sin(w), -std::sin(i) * std::cos(w), std::cos(i));
    const Vec3 node(std::cos(w), std::sin(w), 0.0);
    const Vec3 third = pole.cross(node);
    Mat3 m;
    m.row(0) = node.transpose();
    m.row(1) = third.transpose();
    m.row(2) = pole.transpose();
    return m;
}

}  // namespace

EphemerisProvider::EphemerisProvider(EphemerisMode mode, AnalyticEphemerisParams params)
    : mode_(mode), params_(params) {
    if (mode == EphemerisMode::Table) {
        throw Error(ErrorCode::InvalidArgument, "table mode requires table data");
    }
    if (params_.mu_earth <= 0 || params_.mu_moon <= 0 || params_.earth_sma_km <= 0 ||
        params_.earth_eccentricity < 0 || params_.earth_eccentricity >= 1) {
        throw Error(ErrorCode::InvalidArgument, "invalid analytic ephemeris parameters");
    }
    if (mode == EphemerisMode::CircularAnalytic) {
        params_.earth_eccentricity = 0.0;
        params_.sun_enabled = false;
    }
    pole_alignment_ = pole_alignment_matrix(params_.moon_pole_tilt_deg, params_.moon_pole_node_deg);
}

EphemerisProvider::EphemerisProvider(HermiteTable earth, std::optional<HermiteTable> sun,
                                     AnalyticEphemerisParams params)
    : mode_(EphemerisMode::Table),
      params_(params),
      earth_table_(std::move(earth)),
      sun_table_(std::move(sun)) {
    if (earth_table_.empty()) throw Error(ErrorCode::InvalidArgument, "empty Earth table");
    params_.sun_enabled = sun_table_.has_value();
    pole_alignment_ = pole_alignment_matrix(params_.moon_pole_tilt_deg, params_.moon_pole_node_deg);
}

bool EphemerisProvider::has_sun() const { return params_.sun_enabled; }

Epoch EphemerisProvider::window_begin() const {
    if (mode_ != EphemerisMode::Table) return Epoch(-std::numeric_limits<double>::infinity());
    double b = earth_table_.t_begin();
    if (sun_table_) b = std::max(b, sun_table_->t_begin());
    return Epoch(b);
}

Epoch EphemerisProvider::window_end() const {
    if (mode_ != EphemerisMode::Table) return Epoch(std::numeric_limits<double>::infinity());
    double e = earth_table_.t_end();
    if (sun_table_) e = std::min(e, sun_table_->t_end());
    return Epoch(e);
}

void EphemerisProvider::check_window(Epoch t) const {
    if (mode_ != EphemerisMode::Table) return;
    if (t < window_begin() || t > window_end()) {
        throw Error(ErrorCode::OutOfWindow,
                    fmt::format("epoch {:.6f} outside ephemeris window", t.seconds()));
    }
}

double EphemerisProvider::earth_orbit_period() const {
    const double a = params_.earth_sma_km;
    return 2.0 * kPi * std::sqrt(a * a * a / (params_.mu_earth + params_.mu_moon));
}

double EphemerisProvider::moon_rotation_period() const {
    return params_.moon_rotation_period_s > 0 ? params_.moon_rotation_period_s : earth_orbit_period();
}

BodyState EphemerisProvider::earth_analytic(Epoch t) const {
    const double mu = params_.mu_earth + params_.mu_moon;
    const double a = params_.earth_sma_km;
    const double e = params_.earth_eccentricity;
    const double n = std::sqrt(mu / (a * a * a));
    const double dt = t - params_.reference_epoch;
    const double M = params_.earth_mean_anomaly_deg * kDegToRad + n * dt;

    double cw = std::cos(params_.earth_periapsis_longitude_deg * kDegToRad);
    double sw = std::sin(params_.earth_periapsis_longitude_deg * kDegToRad);

    double xp, yp, vxp, vyp;
    if (e == 0.0) {
        const double c = std::cos(M), s = std::sin(M);
        xp = a * c;
        yp = a * s;
        vxp = -a * n * s;
        vyp = a * n * c;
    } else {
        const double Mw = std::remainder(M, 2.0 * kPi);
        double E = Mw + e * std::sin(Mw);
        for (int k = 0; k < 30; ++k) {
            const double f = E - e * std::sin(E) - Mw;
            const double dE = f / (1.0 - e * std::cos(E));
            E -= dE;
            if (std::abs(dE) < 1e-15) break;
        }
        const double cE = std::cos(E), sE = std::sin(E);
        const double q = std::sqrt(1.0 - e * e);
        const double edot = n / (1.0 - e * cE);
        xp = a * (cE - e);
        yp = a * q * sE;
        vxp = -a * sE * edot;
        vyp = a * q * cE * edot;
    }
    BodyState s;
    s.position = Vec3(cw * xp - sw * yp, sw * xp + cw * yp, 0.0);
    s.velocity = Vec3(cw * vxp - sw * vyp, sw * vxp + cw * vyp, 0.0);
    const double r = s.position.norm();
    s.acceleration = -mu / (r * r * r) * s.position;
    return s;
}

BodyState EphemerisProvider::sun_analytic(Epoch t, const BodyState& earth) const {
    const double ns = 2.0 * kPi / params_.sun_period_s;
    const double L = params_.sun_longitude_deg * kDegToRad + ns * (t - params_.reference_epoch);
    const double inc = params_.sun_inclination_deg * kDegToRad;
    const double D = params_.sun_distance_km;
    const double ci = std::cos(inc), si = std::sin(inc);
    const double cL = std::cos(L), sL = std::sin(L);
    const Vec3 s(D * cL, D * sL * ci, D * sL * si);
    const Vec3 sd(-D * ns * sL, D * ns * cL * ci, D * ns * cL * si);

    // The barycenter sits at mu_E/(mu_E+mu_M) of the way from the Moon to the Earth.
    const double k = params_.mu_earth / (params_.mu_earth + params_.mu_moon);
    BodyState out;
    out.position = k * earth.position + s;
    out.velocity = k * earth.velocity + sd;
    out.acceleration = k * earth.acceleration - ns * ns * s;
    return out;
}

BodyState EphemerisProvider::body_state(Body body, Epoch t) const {
    check_window(t);
    if (mode_ == EphemerisMode::Table) {
        if (body == Body::Earth) return earth_table_.evaluate(t.seconds());
        if (!sun_table_) throw Error(ErrorCode::InvalidArgument, "no Sun table loaded");
        return sun_table_->evaluate(t.seconds());
    }
    const BodyState earth = earth_analytic(t);
    if (body == Body::Earth) return earth;
    if (!params_.sun_enabled) throw Error(ErrorCode::InvalidArgument, "Sun disabled in this mode");
    return sun_analytic(t, earth);
}

Rotation<Frame::P, Frame::I> EphemerisProvider::moon_orientation(Epoch t) const {
    check_window(t);
    const double W = params_.moon_initial_phase_deg * kDegToRad +
                     2.0 * kPi * (t - params_.reference_epoch) / moon_rotation_period();
    const double c = std::cos(W), s = std::sin(W);
    Mat3 spin;
    spin << c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0;
    return Rotation<Frame::P, Frame::I>(spin * pole_alignment_);
}

RotatingFrameDef EphemerisProvider::em_frame(Epoch t) const {
    const BodyState e = body_state(Body::Earth, t);
    const Vec3& d = e.position;
    const Vec3& dd = e.velocity;
    const Vec3& ddd = e.acceleration;

    const double dn = d.norm();
    const Vec3 x = -d / dn;
    const Vec3 xdot = -(dd / dn - d * (d.dot(dd)) / (dn * dn * dn));

    const Vec3 h = d.cross(dd);
    const Vec3 hdot = d.cross(ddd);
    const double hn = h.norm();
    const Vec3 z = h / hn;
    const Vec3 zdot = hdot / hn - h * (h.dot(hdot)) / (hn * hn * hn);

    const Vec3 y = z.cross(x);
    const Vec3 ydot = zdot.cross(x) + z.cross(xdot);

    RotatingFrameDef f;
    f.rotation.row(0) = x.transpose();
    f.rotation.row(1) = y.transpose();
    f.rotation.row(2) = z.transpose();
    f.rotation_rate.row(0) = xdot.transpose();
    f.rotation_rate.row(1) = ydot.transpose();
    f.rotation_rate.row(2) = zdot.transpose();

    // Rdot = -[w_EM x] R, so [w_EM x] = -Rdot R^T.
    const Mat3 W = -f.rotation_rate * f.rotation.transpose();
    const Vec3 w_em(0.5 * (W(2, 1) - W(1, 2)), 0.5 * (W(0, 2) - W(2, 0)), 0.5 * (W(1, 0) - W(0, 1)));
    f.angular_velocity = f.rotation.transpose() * w_em;
    return f;
}

Mat6 EphemerisProvider::sxform_inertial_to_em(Epoch t) const {
    const RotatingFrameDef f = em_frame(t);
    Mat6 T = Mat6::Zero();
    T.topLeftCorner<3, 3>() = f.rotation;
    T.bottomRightCorner<3, 3>() = f.rotation;
    T.bottomLeftCorner<3, 3>() = f.rotation_rate;
    return T;
}

Mat6 EphemerisProvider::sxform_em_to_inertial(Epoch t) const {
    const RotatingFrameDef f = em_frame(t);
    Mat6 T = Mat6::Zero();
    T.topLeftCorner<3, 3>() = f.rotation.transpose();
    T.bottomRightCorner<3, 3>() = f.rotation.transpose();
    T.bottomLeftCorner<3, 3>() = f.rotation_rate.transpose();
    return T;
}

std::string EphemerisProvider::descriptor() const {
    const auto& p = params_;
    return fmt::format(
        "mode={};ref={:.6f};muE={:.12g};muM={:.12g};a={:.12g};e={:.12g};varpi={:.12g};M0={:.12g};"
        "sun={};D={:.12g};Ps={:.12g};inc={:.12g};L0={:.12g};tilt={:.12g};node={:.12g};Prot={:.12g};"
        "W0={:.12g}",
        to_string(mode_), p.reference_epoch.seconds(), p.mu_earth, p.mu_moon, p.earth_sma_km,
        p.earth_eccentricity, p.earth_periapsis_longitude_deg, p.earth_mean_anomaly_deg,
        p.sun_enabled ? 1 : 0, p.sun_distance_km, p.sun_period_s, p.sun_inclination_deg,
        p.sun_longitude_deg, p.moon_pole_tilt_deg, p.moon_pole_node_deg, moon_rotation_period(),
        p.moon_initial_phase_deg);
}

}  // namespace nrhonav
