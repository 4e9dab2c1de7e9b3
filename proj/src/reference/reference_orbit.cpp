#include "nrhonav/reference/reference_orbit.hpp"

#include "nrhonav/core/constants.hpp"
#include "nrhonav/core/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nrhonav {

using nlohmann::json;

namespace {

constexpr double LU = constants::kLengthUnitKm;
constexpr double VU = constants::kVelocityUnitKmS;

Vec6 canonical_scale() {
    Vec6 d;
    d << LU, LU, LU, VU, VU, VU;
    return d;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// ReferenceOrbit

ReferenceOrbit::ReferenceOrbit(std::vector<TrajectoryNode> nodes, std::vector<ReferenceEvent> perilunes,
                               std::vector<ReferenceEvent> apolunes, double period_s, std::string descriptor)
    : nodes_(std::move(nodes)),
      perilunes_(std::move(perilunes)),
      apolunes_(std::move(apolunes)),
      period_(period_s),
      descriptor_(std::move(descriptor)) {
    if (nodes_.size() < 2) throw Error(ErrorCode::InvalidArgument, "reference needs at least two nodes");
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        if (!(nodes_[i].epoch > nodes_[i - 1].epoch)) {
            throw Error(ErrorCode::InvalidArgument, "reference node epochs must increase");
        }
    }
}

std::uint64_t ReferenceOrbit::model_hash() const { return fnv1a64(descriptor_); }

StateVector ReferenceOrbit::lookup_state(Epoch t) const {
    if (nodes_.empty() || t < t_begin() || t > t_end()) {
        throw Error(ErrorCode::OutOfSpan, fmt::format("epoch {:.6f} outside reference span", t.seconds()));
    }
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t,
                               [](Epoch v, const TrajectoryNode& n) { return v < n.epoch; });
    std::size_t i1 = static_cast<std::size_t>(it - nodes_.begin());
    if (i1 >= nodes_.size()) i1 = nodes_.size() - 1;
    const TrajectoryNode& a = nodes_[i1 - 1];
    const TrajectoryNode& b = nodes_[i1];
    if (t == a.epoch) return {a.epoch, a.r, a.v};
    if (t == b.epoch) return {b.epoch, b.r, b.v};

    const double h = b.epoch - a.epoch;
    const double s = (t - a.epoch) / h;
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    const double H0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
    const double H1 = s - 6 * s3 + 8 * s4 - 3 * s5;
    const double H2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    const double H3 = 0.5 * s3 - s4 + 0.5 * s5;
    const double H4 = -4 * s3 + 7 * s4 - 3 * s5;
    const double H5 = 10 * s3 - 15 * s4 + 6 * s5;
    const double D0 = -30 * s2 + 60 * s3 - 30 * s4;
    const double D1 = 1 - 18 * s2 + 32 * s3 - 15 * s4;
    const double D2 = s - 4.5 * s2 + 6 * s3 - 2.5 * s4;
    const double D3 = 1.5 * s2 - 4 * s3 + 2.5 * s4;
    const double D4 = -12 * s2 + 28 * s3 - 15 * s4;
    const double D5 = 30 * s2 - 60 * s3 + 30 * s4;

    const Vec3 r = H0 * a.r + h * H1 * a.v + h * h * H2 * a.a + h * h * H3 * b.a + h * H4 * b.v + H5 * b.r;
    const Vec3 v = (D0 * a.r + D5 * b.r) / h + D1 * a.v + D4 * b.v + h * (D2 * a.a + D3 * b.a);
    return {t, r, v};
}

TargetSpec ReferenceOrbit::nth_perilune_after(Epoch t, int n) const {
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "perilune index must be >= 1");
    auto it = std::upper_bound(perilunes_.begin(), perilunes_.end(), t,
                               [](Epoch v, const ReferenceEvent& e) { return v < e.epoch; });
    const auto first = static_cast<std::size_t>(it - perilunes_.begin());
    const std::size_t idx = first + static_cast<std::size_t>(n - 1);
    if (idx >= perilunes_.size()) {
        throw Error(ErrorCode::OutOfSpan, fmt::format("only {} perilunes remain after {:.3f}",
                                                      perilunes_.size() - first, t.seconds()));
    }
    return {perilunes_[idx].epoch, perilunes_[idx].vx_em, static_cast<int>(idx)};
}

namespace {

json event_json(const ReferenceEvent& e) {
    return json{{"epoch", e.epoch.seconds()},
                {"r", {e.state.r.x(), e.state.r.y(), e.state.r.z()}},
                {"v", {e.state.v.x(), e.state.v.y(), e.state.v.z()}},
                {"vx_em", e.vx_em}};
}

ReferenceEvent event_from_json(const json& j) {
    ReferenceEvent e;
    e.epoch = Epoch(j.at("epoch").get<double>());
    const auto r = j.at("r").get<std::vector<double>>();
    const auto v = j.at("v").get<std::vector<double>>();
    e.state = StateVector(e.epoch, Vec3(r[0], r[1], r[2]), Vec3(v[0], v[1], v[2]));
    e.vx_em = j.at("vx_em").get<double>();
    return e;
}

}  // namespace

void ReferenceOrbit::save(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) const {
    if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
    if (json_path.has_parent_path()) std::filesystem::create_directories(json_path.parent_path());
    std::ofstream csv(csv_path);
    if (!csv) throw Error(ErrorCode::IoError, "cannot write " + csv_path.string());
    csv << "t,x,y,z,vx,vy,vz,ax,ay,az\n";
    for (const auto& n : nodes_) {
        csv << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                           n.epoch.seconds(), n.r.x(), n.r.y(), n.r.z(), n.v.x(), n.v.y(), n.v.z(), n.a.x(),
                           n.a.y(), n.a.z());
    }
    json meta;
    meta["period_s"] = period_;
    meta["model_descriptor"] = descriptor_;
    meta["model_hash"] = fmt::format("{:016x}", model_hash());
    meta["t_begin"] = t_begin().seconds();
    meta["t_end"] = t_end().seconds();
    meta["node_count"] = nodes_.size();
    meta["perilunes"] = json::array();
    for (const auto& e : perilunes_) meta["perilunes"].push_back(event_json(e));
    meta["apolunes"] = json::array();
    for (const auto& e : apolunes_) meta["apolunes"].push_back(event_json(e));
    std::ofstream js(json_path);
    if (!js) throw Error(ErrorCode::IoError, "cannot write " + json_path.string());
    js << meta.dump(2) << "\n";
}

ReferenceOrbit ReferenceOrbit::load(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) {
    std::ifstream csv(csv_path);
    if (!csv) throw Error(ErrorCode::IoError, "cannot open " + csv_path.string());
    std::vector<TrajectoryNode> nodes;
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double t;
        TrajectoryNode n;
        if (!(ss >> t >> n.r.x() >> n.r.y() >> n.r.z() >> n.v.x() >> n.v.y() >> n.v.z() >> n.a.x() >> n.a.y() >>
              n.a.z())) {
            throw Error(ErrorCode::IoError, "malformed reference row: " + line);
        }
        n.epoch = Epoch(t);
        nodes.push_back(n);
    }
    std::ifstream js(json_path);
    if (!js) throw Error(ErrorCode::IoError, "cannot open " + json_path.string());
    json meta;
    try {
        js >> meta;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::IoError, std::string("bad reference metadata: ") + e.what());
    }
    std::vector<ReferenceEvent> peri, apo;
    for (const auto& e : meta.at("perilunes")) peri.push_back(event_from_json(e));
    for (const auto& e : meta.at("apolunes")) apo.push_back(event_from_json(e));
    return ReferenceOrbit(std::move(nodes), std::move(peri), std::move(apo), meta.at("period_s").get<double>(),
                          meta.at("model_descriptor").get<std::string>());
}

// ---------------------------------------------------------------------------
// Seeds

SymmetricSeed table1_seed(const DynamicsModel& model) {
    const Vec3 r(-100.3227942169551, 17287.240158966662, -68230.31701814539);
    const Vec3 v(-0.05947862362245673, 0.03798023721969298, 0.005508556661896624);
    const EphemerisProvider& eph = model.ephemeris();
    const double a = eph.params().earth_sma_km;
    const double n = std::sqrt((eph.params().mu_earth + eph.params().mu_moon) / (a * a * a));
    const double rho = std::hypot(r.x(), r.y());
    SymmetricSeed s;
    s.x0 = rho;
    s.z0 = r.z();
    // Inertial speed kept, direction taken as the retrograde branch in the rotating frame.
    s.vy0 = -v.norm() - n * rho;
    return s;
}

SymmetricSeed cr3bp_seed(const DynamicsModel& model) {
    const EphemerisProvider& eph = model.ephemeris();
    const double a = eph.params().earth_sma_km;
    const double mu_e = eph.params().mu_earth, mu_m = eph.params().mu_moon;
    const double mu = mu_m / (mu_e + mu_m);
    const double n = std::sqrt((mu_e + mu_m) / (a * a * a));
    SymmetricSeed s;
    s.x0 = (1.0221 - (1.0 - mu)) * a;
    s.z0 = -0.1821 * a;
    s.vy0 = -0.1033 * a * n;
    return s;
}

// ---------------------------------------------------------------------------
// Single shooting

namespace {

StateVector seed_state(const EphemerisProvider& eph, Epoch t0, const SymmetricSeed& s) {
    Vec6 em;
    em << s.x0, 0.0, s.z0, 0.0, s.vy0, 0.0;
    return from_em(eph, t0, em);
}

/// Time derivative of the EM-frame state along the trajectory, by central differences.
Vec6 em_state_rate(const Propagator& prop, const StateVector& s) {
    const double dt = 2.0;
    const Vec6 xp = to_em(prop.model().ephemeris(), prop.propagate(s, s.epoch + dt));
    const Vec6 xm = to_em(prop.model().ephemeris(), prop.propagate(s, s.epoch - dt));
    return (xp - xm) / (2.0 * dt);
}

}  // namespace

PeriodicSolution correct_symmetric_orbit(const Propagator& prop, Epoch t0, SymmetricSeed guess, int max_iterations) {
    const EphemerisProvider& eph = prop.model().ephemeris();
    const DynamicsModel& model = prop.model();
    SymmetricSeed s = guess;
    const double horizon = 15.0 * constants::kSecondsPerDay;

    for (int it = 0; it < max_iterations; ++it) {
        const StateVector x0 = seed_state(eph, t0, s);
        // The first perilune must clear the surface or the seed is not an NRHO.
        EventResult peri;
        try {
            peri = prop.find_event(x0, EventSpec::perilune(1), horizon);
        } catch (const Error& e) {
            throw Error(ErrorCode::SeedEscaped, std::string("seed never reaches perilune: ") + e.what());
        }
        if (peri.state.r.norm() < model.moon_radius_km) {
            throw Error(ErrorCode::SeedEscaped,
                        fmt::format("seed perilune radius {:.1f} km is inside the Moon", peri.state.r.norm()));
        }

        EventResult cross;
        try {
            cross = prop.find_event_with_stm(x0, EventSpec::xz_plane(EventDirection::Any, 1), horizon);
        } catch (const Error& e) {
            throw Error(ErrorCode::CorrectionDiverged, std::string("no half-period crossing: ") + e.what());
        }
        const StateVector& xf = cross.state;
        const Vec6 em_f = to_em(eph, xf);
        const Mat6 phi_em = eph.sxform_inertial_to_em(xf.epoch) * (*cross.stm) * eph.sxform_em_to_inertial(t0);
        const Vec6 rate = em_state_rate(prop, xf);

        const Eigen::Vector2d g(em_f[3] / VU, em_f[5] / VU);
        if (g.cwiseAbs().maxCoeff() < 1e-11) {
            return {s, 2.0 * (xf.epoch - t0), it};
        }
        // Constrained sensitivity with the crossing time adjusted to keep y = 0.
        Eigen::Matrix<double, 2, 6> dg;
        for (int c = 0; c < 6; ++c) {
            dg(0, c) = phi_em(3, c) - rate[3] / rate[1] * phi_em(1, c);
            dg(1, c) = phi_em(5, c) - rate[5] / rate[1] * phi_em(1, c);
        }
        Eigen::Matrix2d J;
        J << dg(0, 0), dg(0, 4), dg(1, 0), dg(1, 4);
        const Eigen::Vector2d rhs(em_f[3], em_f[5]);
        Eigen::Vector2d step = J.colPivHouseholderQr().solve(-rhs);
        if (!step.allFinite()) throw Error(ErrorCode::CorrectionDiverged, "singular correction Jacobian");
        const double limit = 2000.0;
        if (std::abs(step[0]) > limit) step *= limit / std::abs(step[0]);
        s.x0 += step[0];
        s.vy0 += step[1];
    }
    throw Error(ErrorCode::CorrectionDiverged, "single shooting did not converge");
}

// ---------------------------------------------------------------------------
// Multiple shooting and dense sampling

ReferenceOrbit generate_reference(const Propagator& prop, Epoch t0, SymmetricSeed seed, const ReferenceGenConfig& cfg,
                                  const Propagator* symmetric) {
    if (cfg.revolutions < 1) throw Error(ErrorCode::InvalidArgument, "revolutions must be >= 1");
    const EphemerisProvider& eph = prop.model().ephemeris();
    const PeriodicSolution sol =
        correct_symmetric_orbit(symmetric ? *symmetric : prop, t0, seed, cfg.max_iterations);
    const double T = sol.period_s;
    const int K = cfg.revolutions;

    std::vector<StateVector> patches(static_cast<std::size_t>(K) + 1);
    for (int k = 0; k <= K; ++k) {
        patches[static_cast<std::size_t>(k)] = seed_state(eph, t0 + k * T, sol.seed);
    }
    const Vec6 scale = canonical_scale();
    const Vec6 inv_scale = scale.cwiseInverse();

    bool converged = false;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(6 * K, 6 * (K + 1));
        Eigen::VectorXd F(6 * K);
        for (int k = 0; k < K; ++k) {
            const auto& pk = patches[static_cast<std::size_t>(k)];
            const auto& pn = patches[static_cast<std::size_t>(k) + 1];
            auto [xf, phi] = prop.propagate_with_stm(pk, pn.epoch);
            F.segment<6>(6 * k) = inv_scale.asDiagonal() * (xf.vector() - pn.vector());
            J.block<6, 6>(6 * k, 6 * k) = inv_scale.asDiagonal() * phi * scale.asDiagonal();
            J.block<6, 6>(6 * k, 6 * (k + 1)) = -Mat6::Identity();
        }
        const double defect = F.cwiseAbs().maxCoeff();
        if (defect < cfg.defect_tol) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd JJt = J * J.transpose();
        const Eigen::VectorXd y = JJt.ldlt().solve(-F);
        const Eigen::VectorXd dx = J.transpose() * y;
        if (!dx.allFinite()) throw Error(ErrorCode::CorrectionDiverged, "multiple shooting produced NaN");
        for (int k = 0; k <= K; ++k) {
            auto& p = patches[static_cast<std::size_t>(k)];
            const Vec6 upd = p.vector() + scale.asDiagonal() * dx.segment<6>(6 * k);
            p = StateVector(p.epoch, upd);
        }
    }
    if (!converged) throw Error(ErrorCode::CorrectionDiverged, "multiple shooting did not reach the defect tolerance");

    IntegratorConfig dense_cfg = prop.config();
    dense_cfg.max_step = std::min(dense_cfg.max_step, cfg.node_max_step_s / constants::kTimeUnitS);
    const Propagator dense(prop.model_ptr(), dense_cfg);

    std::vector<TrajectoryNode> nodes;
    std::vector<ReferenceEvent> perilunes, apolunes;
    for (int k = 0; k < K; ++k) {
        const auto& pk = patches[static_cast<std::size_t>(k)];
        std::vector<TrajectoryNode> seg;
        (void)dense.propagate(pk, patches[static_cast<std::size_t>(k) + 1].epoch, &seg);
        if (!nodes.empty()) seg.erase(seg.begin());
        nodes.insert(nodes.end(), seg.begin(), seg.end());

        apolunes.push_back({pk.epoch, pk, to_em(eph, pk)[3]});
        const EventResult peri = prop.find_event(pk, EventSpec::perilune(1), T);
        perilunes.push_back({peri.state.epoch, peri.state, to_em(eph, peri.state)[3]});
        if (peri.state.r.norm() <= prop.model().moon_radius_km) {
            throw Error(ErrorCode::SeedEscaped, "corrected orbit intersects the Moon");
        }
    }
    const auto& last = patches.back();
    apolunes.push_back({last.epoch, last, to_em(eph, last)[3]});

    const std::string descriptor = fmt::format("{};tol={:.3g}/{:.3g};K={};seed={:.12g},{:.12g},{:.12g}",
                                               prop.model().descriptor(), prop.config().abs_tol,
                                               prop.config().rel_tol, K, sol.seed.x0, sol.seed.z0, sol.seed.vy0);
    return ReferenceOrbit(std::move(nodes), std::move(perilunes), std::move(apolunes), T, descriptor);
}

ReferenceOrbit build_baseline_reference(const Propagator& prop, Epoch t0, const ReferenceGenConfig& cfg,
                                        SeedSource preferred, SeedSource* used, const Propagator* symmetric) {
    const DynamicsModel& seed_model = symmetric ? symmetric->model() : prop.model();
    if (preferred == SeedSource::Table1) {
        try {
            ReferenceOrbit ref = generate_reference(prop, t0, table1_seed(seed_model), cfg, symmetric);
            if (used) *used = SeedSource::Table1;
            return ref;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::CorrectionDiverged && e.code() != ErrorCode::SeedEscaped) throw;
        }
    }
    ReferenceOrbit ref = generate_reference(prop, t0, cr3bp_seed(seed_model), cfg, symmetric);
    if (used) *used = SeedSource::Cr3bp;
    return ref;
}

}  // namespace nrhonav
