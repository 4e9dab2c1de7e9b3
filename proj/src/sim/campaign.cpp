#include "nrhonav/sim/campaign.hpp"

#include "nrhonav/core/constants.hpp"
#include "nrhonav/core/error.hpp"
#include "nrhonav/core/parallel.hpp"
#include "nrhonav/core/random.hpp"
#include "nrhonav/frames/anomaly.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace nrhonav {

using nlohmann::json;

const char* to_string(RowKind k) {
    switch (k) {
        case RowKind::Start: return "start";
        case RowKind::Prior: return "prior";
        case RowKind::Posterior: return "posterior";
        case RowKind::Skipped: return "skipped";
        case RowKind::Sample: return "sample";
        case RowKind::Burn: return "burn";
        case RowKind::Perilune: return "perilune";
        case RowKind::End: return "end";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Statistics

double percentile_linear(std::vector<double> values, double p) {
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<std::pair<double, double>> sigma_vz_profile(const std::vector<RunResult>& runs) {
    std::map<long, std::pair<double, int>> bins;
    for (const auto& r : runs) {
        for (const auto& row : r.series) {
            if (row.kind != RowKind::Sample) continue;
            auto& b = bins[std::lround(row.ta_deg) % 360];
            b.first += row.sigma[5];
            b.second += 1;
        }
    }
    std::vector<std::pair<double, double>> out;
    for (const auto& [ta, b] : bins) out.emplace_back(static_cast<double>(ta), b.first / b.second);
    return out;
}

AggregateStats aggregate_report(const std::vector<RunResult>& runs) {
    if (runs.empty()) throw Error(ErrorCode::InvalidArgument, "no runs to aggregate");
    AggregateStats a;
    a.runs = static_cast<int>(runs.size());
    std::vector<double> yearly;
    int ok = 0, triggered = 0, iters = 0, steps = 0, inside = 0;
    double se = 0.0;
    int se_n = 0;
    for (const auto& r : runs) {
        yearly.push_back(r.yearly_dv_cms);
        if (r.success) ++ok;
        for (const auto& m : r.maneuvers) {
            if (!m.triggered) continue;
            ++triggered;
            iters += m.iterations;
        }
        steps += r.filter_steps;
        inside += r.inside_3sigma;
        if (r.filter_steps > 0) {
            se += r.rms_position_error_km * r.rms_position_error_km;
            ++se_n;
        }
    }
    double sum = 0.0;
    for (double y : yearly) sum += y;
    a.mean_yearly_dv_cms = sum / static_cast<double>(yearly.size());
    a.median_yearly_dv_cms = percentile_linear(yearly, 50.0);
    a.p95_yearly_dv_cms = percentile_linear(yearly, 95.0);
    a.max_yearly_dv_cms = *std::max_element(yearly.begin(), yearly.end());
    a.success_rate = static_cast<double>(ok) / static_cast<double>(runs.size());
    a.mean_iterations = triggered > 0 ? static_cast<double>(iters) / triggered : 0.0;
    a.maneuvers_per_run = static_cast<double>(triggered) / static_cast<double>(runs.size());
    a.containment_3sigma = steps > 0 ? static_cast<double>(inside) / steps : 0.0;
    a.rms_position_error_km = se_n > 0 ? std::sqrt(se / se_n) : 0.0;

    a.sigma_vz_argmin_ta_deg = std::numeric_limits<double>::quiet_NaN();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [ta, s] : sigma_vz_profile(runs)) {
        if (ta < 120.0 || ta > 240.0) continue;
        if (s < best) {
            best = s;
            a.sigma_vz_argmin_ta_deg = ta;
        }
    }
    return a;
}

// ---------------------------------------------------------------------------
// Model factories

std::shared_ptr<const EphemerisProvider> make_ephemeris(EphemerisMode mode, const EphemerisConfig& cfg) {
    switch (mode) {
        case EphemerisMode::CircularAnalytic:
            return std::make_shared<EphemerisProvider>(EphemerisProvider::circular_analytic());
        case EphemerisMode::EnrichedAnalytic:
            return std::make_shared<EphemerisProvider>(EphemerisProvider::enriched_analytic());
        case EphemerisMode::Table: {
            std::optional<HermiteTable> sun;
            if (!cfg.table_sun_csv.empty()) sun = HermiteTable::from_csv(cfg.table_sun_csv);
            return std::make_shared<EphemerisProvider>(HermiteTable::from_csv(cfg.table_earth_csv), sun,
                                                       AnalyticEphemerisParams::enriched());
        }
    }
    throw Error(ErrorCode::ConfigError, "unknown ephemeris mode");
}

std::shared_ptr<DynamicsModel> make_truth_model(const ScenarioConfig& cfg,
                                                std::shared_ptr<const EphemerisProvider> eph) {
    auto m = std::make_shared<DynamicsModel>(eph);
    if (!cfg.dynamics.j2) m->j2 = 0.0;
    m->sun_enabled = cfg.dynamics.sun && eph->has_sun();
    m->srp = cfg.dynamics.srp;
    m->srp.enabled = cfg.dynamics.srp.enabled && eph->has_sun();
    m->validate();
    return m;
}

std::shared_ptr<DynamicsModel> make_reference_model(const ScenarioConfig& cfg) {
    const auto eph = make_ephemeris(cfg.ephemeris.reference_mode, cfg.ephemeris);
    if (cfg.ephemeris.reference_mode != EphemerisMode::CircularAnalytic) return make_truth_model(cfg, eph);
    auto m = std::make_shared<DynamicsModel>(eph);
    if (!cfg.dynamics.j2) m->j2 = 0.0;
    m->sun_enabled = false;
    m->srp.enabled = false;
    return m;
}

ReferenceOrbit generate_campaign_reference(const ScenarioConfig& cfg, SeedSource preferred, int revolutions) {
    ReferenceGenConfig gen;
    gen.revolutions = revolutions > 0 ? revolutions : cfg.campaign.revolutions + cfg.controller.target_perilune + 3;
    const Epoch t0(constants::kBaselineEpochS);
    const Propagator prop(make_reference_model(cfg), cfg.dynamics.integrator);
    if (cfg.ephemeris.reference_mode == EphemerisMode::CircularAnalytic) {
        return build_baseline_reference(prop, t0, gen, preferred);
    }
    ScenarioConfig circ = cfg;
    circ.ephemeris.reference_mode = EphemerisMode::CircularAnalytic;
    const Propagator symmetric(make_reference_model(circ), cfg.dynamics.integrator);
    return build_baseline_reference(prop, t0, gen, preferred, nullptr, &symmetric);
}

std::shared_ptr<const ReferenceOrbit> build_reference(const ScenarioConfig& cfg) {
    const auto& c = cfg.campaign;
    if (!c.reference_csv.empty() && !c.reference_json.empty() && std::filesystem::exists(c.reference_csv) &&
        std::filesystem::exists(c.reference_json)) {
        return std::make_shared<ReferenceOrbit>(ReferenceOrbit::load(c.reference_csv, c.reference_json));
    }
    return std::make_shared<ReferenceOrbit>(
        generate_campaign_reference(cfg, SeedSource::Cr3bp, c.reference_revolutions));
}

Vec6 sample_state_error(RandomStream& rng, double pos_sigma_km, double vel_sigma_kms) {
    Vec6 x;
    x << rng.normal3(pos_sigma_km), rng.normal3(vel_sigma_kms);
    return x;
}

// Rotates u by a Gaussian angle about a random axis perpendicular to it and scales its magnitude.
Vec3 apply_execution_error(const Vec3& u, RandomStream& rng, const ErrorModel& em) {
    const double mag = 1.0 + rng.normal(em.control_mag_3sigma_rel / 3.0);
    const Vec3 a = rng.unit_vector();
    const double angle = rng.normal(em.control_dir_3sigma_deg / 3.0 * constants::kDegToRad);
    const double un = u.norm();
    if (un == 0.0) return u;
    const Vec3 uhat = u / un;
    Vec3 axis = a - a.dot(uhat) * uhat;
    if (axis.norm() < 1e-12) axis = uhat.unitOrthogonal();
    return mag * (rodrigues(axis.normalized(), angle) * u);
}

Mat3 execution_covariance(const Vec3& u, const ErrorModel& em) {
    const double un = u.norm();
    if (un == 0.0) return Mat3::Zero();
    const Vec3 uhat = u / un;
    const double sm = em.control_mag_3sigma_rel / 3.0 * un;
    const double sd = em.control_dir_3sigma_deg / 3.0 * constants::kDegToRad * un;
    const Mat3 along = uhat * uhat.transpose();
    // The pointing error is a rotation about one random perpendicular axis, so
    // its variance is shared by the two perpendicular directions.
    return sm * sm * along + 0.5 * sd * sd * (Mat3::Identity() - along);
}

// ---------------------------------------------------------------------------
// Single run

namespace {

struct ScheduledEvent {
    double ta_deg;
    bool perilune = false;
    bool measurement = false;
    bool sample = false;
    bool burn = false;
};

std::vector<ScheduledEvent> build_schedule(const ScenarioConfig& cfg) {
    const auto kind = cfg.campaign.kind;
    const bool filtering = kind == ExperimentKind::FilterOnly || kind == ExperimentKind::FullPipeline;
    const bool control = kind == ExperimentKind::ControlOnly || kind == ExperimentKind::FullPipeline;
    std::map<long long, ScheduledEvent> byta;
    auto slot = [&](double ta) -> ScheduledEvent& {
        const long long key = std::llround(ta * 1e6);
        auto it = byta.find(key);
        if (it == byta.end()) it = byta.emplace(key, ScheduledEvent{ta}).first;
        return it->second;
    };
    slot(0.0).perilune = true;
    if (filtering) {
        for (double ta : cfg.measurements.true_anomalies_deg) slot(ta).measurement = true;
        for (double ta : cfg.measurements.sample_true_anomalies_deg) slot(ta).sample = true;
    }
    const bool keeping = kind == ExperimentKind::FilterOnly && cfg.campaign.filter_truth_station_keeping;
    if (control || keeping) slot(cfg.controller.burn_ta_deg).burn = true;
    std::vector<ScheduledEvent> out;
    for (const auto& [k, e] : byta) out.push_back(e);
    return out;
}

Mat6 diag_cov(double pos_sigma_km, double vel_sigma_kms) {
    Vec6 d;
    d << Vec3::Constant(pos_sigma_km * pos_sigma_km), Vec3::Constant(vel_sigma_kms * vel_sigma_kms);
    return d.asDiagonal();
}

class RunContext {
public:
    RunContext(const ScenarioConfig& cfg, const ReferenceOrbit& ref, std::shared_ptr<const EphemerisProvider> eph,
               std::shared_ptr<const DynamicsModel> filter_model, int index)
        : cfg_(cfg),
          ref_(ref),
          index_(index),
          rng_init_(cfg.campaign.seed, {static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(Substream::InitialError)}),
          rng_meas_(cfg.campaign.seed, {static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(Substream::MeasurementNoise)}),
          rng_att_(cfg.campaign.seed, {static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(Substream::Attitude)}),
          rng_exec_(cfg.campaign.seed, {static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(Substream::Execution)}),
          rng_od_(cfg.campaign.seed, {static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(Substream::OrbitDetermination)}),
          rng_srp_(cfg.campaign.seed, {static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(Substream::SrpParameters)}),
          filter_prop_(std::move(filter_model), cfg.dynamics.integrator),
          truth_prop_(build_truth(cfg, eph), cfg.dynamics.integrator) {
        const auto kind = cfg.campaign.kind;
        filtering_ = kind == ExperimentKind::FilterOnly || kind == ExperimentKind::FullPipeline;
        control_ = kind == ExperimentKind::ControlOnly || kind == ExperimentKind::FullPipeline;
        chi2_3sigma_ = chi2_3dof_thresholds()[2];
    }

    RunResult run();

private:
    std::shared_ptr<const DynamicsModel> build_truth(const ScenarioConfig& cfg,
                                                     std::shared_ptr<const EphemerisProvider> eph) {
        auto m = make_truth_model(cfg, std::move(eph));
        const double cr_scale = 1.0 + rng_srp_.normal(cfg.errors.srp_cr_3sigma_rel / 3.0);
        const double am_scale = 1.0 + rng_srp_.normal(cfg.errors.srp_am_3sigma_rel / 3.0);
        m->srp.cr *= cr_scale;
        m->srp.area_to_mass_m2_kg *= am_scale;
        return m;
    }

    FilterState predict(const FilterState& fs, Epoch t) const {
        if (cfg_.filter.type == FilterType::UKF) {
            return ukf_predict(filter_prop_, cfg_.filter.process, cfg_.filter.ut, fs, t);
        }
        return ekf_predict(filter_prop_, cfg_.filter.process, fs, t);
    }

    double true_anomaly(const StateVector& s) const {
        return osculating_true_anomaly(s, truth_prop_.model().mu_moon);
    }

    void record(RowKind kind, const StateVector& truth, const FilterState* fs, int m = 0, double dv_ms = 0.0) {
        SeriesRow row;
        row.t = truth.epoch;
        row.ta_deg = true_anomaly(truth);
        row.kind = kind;
        row.truth = truth.vector();
        row.limb_points = m;
        row.dv_ms = dv_ms;
        if (fs) {
            row.estimate = fs->mean.vector();
            row.sigma = fs->std_physical();
            row.has_covariance = true;
            const Vec3 e = truth.r - fs->mean.r;
            const Mat3 P = fs->covariance_physical().topLeftCorner<3, 3>();
            row.mahalanobis2_pos = e.dot(P.ldlt().solve(e));
            ++result_.filter_steps;
            if (row.mahalanobis2_pos <= chi2_3sigma_) ++result_.inside_3sigma;
            sq_err_ += e.squaredNorm();
        }
        if (cfg_.campaign.write_series) result_.series.push_back(row);
    }

    void measure(StateVector& truth, FilterState& fs);
    void burn(StateVector& truth, FilterState& fs);
    void keep_on_orbit(StateVector& truth, FilterState& fs);

    const ScenarioConfig& cfg_;
    const ReferenceOrbit& ref_;
    int index_;
    RandomStream rng_init_, rng_meas_, rng_att_, rng_exec_, rng_od_, rng_srp_;
    Propagator filter_prop_;
    Propagator truth_prop_;
    bool filtering_ = false;
    bool control_ = false;
    double chi2_3sigma_ = 0.0;
    double sq_err_ = 0.0;
    RunResult result_;
};

void RunContext::measure(StateVector& truth, FilterState& fs) {
    fs = predict(fs, truth.epoch);
    record(RowKind::Prior, truth, &fs);

    const EphemerisProvider& eph = truth_prop_.model().ephemeris();
    const Mat3 p_from_i = eph.moon_orientation(truth.epoch).matrix;
    const Vec3 r_true_p = p_from_i * truth.r;
    const Vec3 r_est_p = p_from_i * fs.mean.r;

    // The camera is pointed with the estimate; the true attitude carries an unknown error.
    const Mat3 believed = point_at_body(r_est_p);
    Vec3 axis;
    do {
        const double ax = rng_att_.uniform(-1.0, 1.0);
        const double ay = rng_att_.uniform(-1.0, 1.0);
        const double az = rng_att_.uniform(-1.0, 1.0);
        axis = Vec3(ax, ay, az);
    } while (axis.norm() < 1e-12);
    const double dphi = rng_att_.normal(cfg_.camera.model.sigma_phi_rad);
    const Mat3 true_p_from_c = rodrigues(axis.normalized(), dphi) * believed;
    const Vec3 r_c = true_p_from_c.transpose() * r_true_p;

    SynthesisOptions opt;
    opt.sector_deg = cfg_.camera.sector_deg;
    opt.center_anti_sun = cfg_.camera.center_anti_sun;
    opt.m_requested = limb_point_count(cfg_.camera.model, cfg_.camera.shape, r_true_p.norm(), cfg_.camera.sector_deg,
                                       cfg_.camera.density, cfg_.camera.m_min, cfg_.camera.m_max);
    const Vec3 sun_i = eph.has_sun() ? eph.position(Body::Sun, truth.epoch) : Vec3::UnitX();
    opt.sun_direction_p = (p_from_i * sun_i).normalized();

    try {
        LimbObservation obs = synthesize_limb_points(cfg_.camera.model, cfg_.camera.shape, r_c, true_p_from_c,
                                                     believed, opt, &rng_meas_);
        obs.epoch = truth.epoch;
        const PositionMeasurement meas = process_limb(cfg_.camera.model, cfg_.camera.shape, obs);
        const auto [y, R] = rotate_measurement_to_inertial(meas, eph, truth.epoch);
        UpdateOptions uo;
        uo.gate_chi2 = cfg_.filter.gate_chi2;
        fs = measurement_update(fs, y, R, uo);
        ++result_.measurements_used;
        record(RowKind::Posterior, truth, &fs, meas.m);
    } catch (const Error& e) {
        switch (e.code()) {
            case ErrorCode::BodyNotInFrame:
            case ErrorCode::RangeTooClose:
            case ErrorCode::RankDeficient:
            case ErrorCode::NotOutsideBody:
            case ErrorCode::InnovationGateExceeded:
                ++result_.measurements_skipped;
                record(RowKind::Skipped, truth, &fs);
                break;
            default: throw;
        }
    }
}

void RunContext::keep_on_orbit(StateVector& truth, FilterState& fs) {
    ControllerConfig cc = cfg_.controller;
    cc.method = ControlMethod::DC;
    const Epoch t = truth.epoch;
    const FilterState exact = FilterState::from_physical(truth, Mat6::Identity() * 1e-12);
    const ManeuverResult mr = compute_maneuver(truth_prop_, cc, exact,
                                               [&](int n) { return ref_.nth_perilune_after(t, n); });
    if (mr.triggered) {
        truth.v += mr.u;
        fs = predict(fs, truth.epoch);
        fs.mean.v += mr.u;
    }
}

void RunContext::burn(StateVector& truth, FilterState& fs) {
    if (!control_) {
        keep_on_orbit(truth, fs);
        return;
    }
    FilterState estimate;
    if (filtering_) {
        fs = predict(fs, truth.epoch);
        estimate = fs;
    } else {
        const double sp = cfg_.errors.od_pos_3sigma_km / 3.0;
        const double sv = cfg_.errors.od_vel_3sigma_cms / 3.0 * 1e-5;
        const Vec6 err = sample_state_error(rng_od_, sp, sv);
        estimate = FilterState::from_physical(StateVector(truth.epoch, Vec6(truth.vector() + err)), diag_cov(sp, sv));
    }

    const Epoch t = truth.epoch;
    const ManeuverResult mr = compute_maneuver(filter_prop_, cfg_.controller, estimate,
                                               [&](int n) { return ref_.nth_perilune_after(t, n); });

    ManeuverRecord rec;
    rec.t = truth.epoch;
    rec.ta_deg = true_anomaly(truth);
    rec.triggered = mr.triggered;
    rec.converged = mr.converged;
    rec.iterations = mr.iterations;
    rec.predicted_violation_ms = mr.predicted_violation_ms;
    rec.achieved_violation_ms = mr.achieved_violation_ms;
    if (mr.triggered) {
        const Vec3 u_exec = apply_execution_error(mr.u, rng_exec_, cfg_.errors);
        truth.v += u_exec;
        rec.commanded_ms = mr.u.norm() * 1e3;
        rec.executed_ms = u_exec.norm() * 1e3;
        result_.cumulative_dv_cms += u_exec.norm() * 1e5;
        if (filtering_) {
            fs.mean.v += mr.u;
            if (cfg_.errors.inflate_at_maneuver) {
                const double vu = constants::kVelocityUnitKmS;
                fs.sigma.bottomRightCorner<3, 3>() += execution_covariance(mr.u, cfg_.errors) / (vu * vu);
            }
        }
        if (!mr.converged && result_.success) {
            result_.success = false;
            result_.failure = fmt::format("controller did not converge at t={:.3f}", truth.epoch.seconds());
        }
    }
    result_.maneuvers.push_back(rec);
    record(RowKind::Burn, truth, filtering_ ? &fs : nullptr, 0, rec.executed_ms);
}

RunResult RunContext::run() {
    result_.index = index_;
    const Epoch t0 = ref_.t_begin();
    const double period = ref_.period();
    const Epoch t_end = t0 + cfg_.campaign.revolutions * period;
    result_.duration_s = t_end - t0;

    const StateVector nominal = ref_.lookup_state(t0);
    const double sp = cfg_.errors.initial_pos_3sigma_km / 3.0;
    const double sv = cfg_.errors.initial_vel_3sigma_cms / 3.0 * 1e-5;
    StateVector truth(t0, Vec6(nominal.vector() + sample_state_error(rng_init_, sp, sv)));
    FilterState fs = FilterState::from_physical(nominal, diag_cov(sp, sv));
    record(RowKind::Start, truth, filtering_ ? &fs : nullptr);

    const auto schedule = build_schedule(cfg_);
    result_.min_perilune_km = std::numeric_limits<double>::infinity();
    result_.max_perilune_km = 0.0;

    try {
        // An event that the initial error has just pushed behind the start is
        // processed on the initial state instead of one revolution later.
        const double ta0 = true_anomaly(truth);
        constexpr double kStartWindowDeg = 0.5;
        std::size_t next = 0;
        while (next < schedule.size() && schedule[next].ta_deg < ta0 - kStartWindowDeg) ++next;
        if (next == schedule.size()) next = 0;
        bool immediate = schedule[next].ta_deg <= ta0 && schedule[next].ta_deg >= ta0 - kStartWindowDeg;

        for (;;) {
            const ScheduledEvent& ev = schedule[next];
            next = (next + 1) % schedule.size();
            if (!immediate) {
                const EventResult er =
                    truth_prop_.find_event(truth, EventSpec::true_anomaly(ev.ta_deg), 1.5 * period);
                if (er.state.epoch > t_end) break;
                truth = er.state;
            }
            immediate = false;

            if (ev.perilune) {
                const double rp = truth.r.norm();
                result_.min_perilune_km = std::min(result_.min_perilune_km, rp);
                result_.max_perilune_km = std::max(result_.max_perilune_km, rp);
                record(RowKind::Perilune, truth, nullptr);
                if (rp < 1.5e3 || rp > 1e4) {
                    result_.success = false;
                    result_.failure = fmt::format("perilune radius {:.1f} km out of bounds", rp);
                    break;
                }
            }
            if (ev.measurement) measure(truth, fs);
            if (ev.sample) {
                const FilterState shown = predict(fs, truth.epoch);
                record(RowKind::Sample, truth, &shown);
            }
            if (ev.burn) burn(truth, fs);
        }
        if (result_.success) {
            truth = truth_prop_.propagate(truth, t_end);
            if (filtering_) fs = predict(fs, t_end);
            record(RowKind::End, truth, filtering_ ? &fs : nullptr);
        }
    } catch (const Error& e) {
        result_.success = false;
        result_.failure = e.what();
    }

    if (result_.max_perilune_km == 0.0) result_.min_perilune_km = 0.0;
    result_.yearly_dv_cms =
        result_.cumulative_dv_cms * (constants::kDaysPerYear * constants::kSecondsPerDay) / result_.duration_s;
    if (result_.filter_steps > 0) result_.rms_position_error_km = std::sqrt(sq_err_ / result_.filter_steps);
    return std::move(result_);
}

}  // namespace

// ---------------------------------------------------------------------------
// Campaign

Campaign::Campaign(ScenarioConfig cfg, std::shared_ptr<const ReferenceOrbit> reference)
    : cfg_(std::move(cfg)), reference_(std::move(reference)) {
    cfg_.validate();
    if (!reference_) reference_ = build_reference(cfg_);
    truth_eph_ = make_ephemeris(cfg_.ephemeris.truth_mode, cfg_.ephemeris);
    filter_model_ = make_truth_model(cfg_, truth_eph_);
}

RunResult Campaign::run_one(int index) const {
    RunContext ctx(cfg_, *reference_, truth_eph_, filter_model_, index);
    return ctx.run();
}

MonteCarloReport Campaign::run() const {
    MonteCarloReport rep;
    rep.config = cfg_;
    rep.runs.resize(static_cast<std::size_t>(cfg_.campaign.runs));
    parallel_for(rep.runs.size(), cfg_.campaign.workers,
                 [&](std::size_t i) { rep.runs[i] = run_one(static_cast<int>(i)); });
    rep.aggregate = aggregate_report(rep.runs);
    return rep;
}

namespace {

MonteCarloReport run_kind(ScenarioConfig cfg, ExperimentKind kind, std::shared_ptr<const ReferenceOrbit> ref) {
    cfg.campaign.kind = kind;
    return Campaign(std::move(cfg), std::move(ref)).run();
}

}  // namespace

MonteCarloReport run_filter_experiment(ScenarioConfig cfg, std::shared_ptr<const ReferenceOrbit> ref) {
    return run_kind(std::move(cfg), ExperimentKind::FilterOnly, std::move(ref));
}
MonteCarloReport run_control_experiment(ScenarioConfig cfg, std::shared_ptr<const ReferenceOrbit> ref) {
    return run_kind(std::move(cfg), ExperimentKind::ControlOnly, std::move(ref));
}
MonteCarloReport run_full_pipeline(ScenarioConfig cfg, std::shared_ptr<const ReferenceOrbit> ref) {
    return run_kind(std::move(cfg), ExperimentKind::FullPipeline, std::move(ref));
}

// ---------------------------------------------------------------------------
// Output

namespace {

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json matrix_json(const Mat3& m) {
    json rows = json::array();
    for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
    return rows;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

std::string g17(double x) { return fmt::format("{:.17g}", x); }

}  // namespace

json report_to_json(const MonteCarloReport& report) {
    const AggregateStats& a = report.aggregate;
    json j;
    j["config"] = report.config.to_json();
    // Execution settings do not change results; leaving them out keeps reports comparable.
    j["config"]["campaign"].erase("workers");
    j["config"]["campaign"].erase("out_dir");
    j["aggregate"] = {{"runs", a.runs},
                      {"mean_yearly_dv_cms", a.mean_yearly_dv_cms},
                      {"median_yearly_dv_cms", a.median_yearly_dv_cms},
                      {"p95_yearly_dv_cms", a.p95_yearly_dv_cms},
                      {"max_yearly_dv_cms", a.max_yearly_dv_cms},
                      {"success_rate", a.success_rate},
                      {"mean_iterations", a.mean_iterations},
                      {"maneuvers_per_run", a.maneuvers_per_run},
                      {"containment_3sigma", a.containment_3sigma},
                      {"rms_position_error_km", a.rms_position_error_km},
                      {"sigma_vz_argmin_ta_deg", finite_or_null(a.sigma_vz_argmin_ta_deg)},
                      {"percentile_definition", "linear interpolation between order statistics at (n-1)p"}};
    json runs = json::array();
    for (const auto& r : report.runs) {
        runs.push_back({{"index", r.index},
                        {"success", r.success},
                        {"failure", r.failure},
                        {"duration_s", r.duration_s},
                        {"cumulative_dv_cms", r.cumulative_dv_cms},
                        {"yearly_dv_cms", r.yearly_dv_cms},
                        {"measurements_used", r.measurements_used},
                        {"measurements_skipped", r.measurements_skipped},
                        {"filter_steps", r.filter_steps},
                        {"inside_3sigma", r.inside_3sigma},
                        {"rms_position_error_km", r.rms_position_error_km},
                        {"min_perilune_km", r.min_perilune_km},
                        {"max_perilune_km", r.max_perilune_km},
                        {"maneuvers", static_cast<int>(r.maneuvers.size())}});
    }
    j["runs"] = runs;
    json profile = json::array();
    for (const auto& [ta, s] : sigma_vz_profile(report.runs)) profile.push_back({ta, s});
    j["sigma_vz_profile"] = profile;
    return j;
}

void write_report(const MonteCarloReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "summary.json", report_to_json(report).dump(2) + "\n");

    std::string man = "run,t,ta_deg,triggered,converged,iterations,commanded_ms,executed_ms,predicted_violation_ms,"
                      "achieved_violation_ms\n";
    for (const auto& r : report.runs) {
        for (const auto& m : r.maneuvers) {
            man += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.index, g17(m.t.seconds()), g17(m.ta_deg),
                               m.triggered ? 1 : 0, m.converged ? 1 : 0, m.iterations, g17(m.commanded_ms),
                               g17(m.executed_ms), g17(m.predicted_violation_ms), g17(m.achieved_violation_ms));
        }
    }
    write_text(dir / "maneuvers.csv", man);

    if (!report.config.campaign.write_series) return;
    std::filesystem::create_directories(dir / "runs");
    for (const auto& r : report.runs) {
        std::string csv =
            "t,ta_deg,event,x,y,z,vx,vy,vz,ex,ey,ez,evx,evy,evz,sx,sy,sz,svx,svy,svz,limb_points,dv_ms,"
            "has_covariance,mahalanobis2_pos\n";
        for (const auto& row : r.series) {
            csv += fmt::format("{},{},{}", g17(row.t.seconds()), g17(row.ta_deg), to_string(row.kind));
            for (int i = 0; i < 6; ++i) csv += "," + g17(row.truth[i]);
            for (int i = 0; i < 6; ++i) csv += "," + g17(row.estimate[i]);
            for (int i = 0; i < 6; ++i) csv += "," + g17(row.sigma[i]);
            csv += fmt::format(",{},{},{},{}\n", row.limb_points, g17(row.dv_ms), row.has_covariance ? 1 : 0,
                               g17(row.mahalanobis2_pos));
        }
        write_text(dir / "runs" / fmt::format("run_{:04d}.csv", r.index), csv);
    }
}

ValidationConfig validation_config(const ScenarioConfig& cfg) {
    ValidationConfig v;
    v.camera = cfg.camera.model;
    v.shape = cfg.camera.shape;
    v.range_km = cfg.campaign.validation_range_km;
    v.m = cfg.campaign.validation_m;
    v.sector_deg = cfg.camera.sector_deg;
    v.trials = cfg.campaign.validation_trials;
    v.seed = cfg.campaign.seed;
    v.workers = cfg.campaign.workers;
    return v;
}

void write_validation(const ValidationResult& res, const ValidationConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json j;
    j["config"] = {{"focal_length_mm", cfg.camera.focal_length_mm},
                   {"range_km", cfg.range_km},
                   {"m", cfg.m},
                   {"sector_deg", cfg.sector_deg},
                   {"sigma_pix", cfg.camera.sigma_pix},
                   {"sigma_phi_arcsec", cfg.camera.sigma_phi_rad / constants::kArcsecToRad},
                   {"trials", cfg.trials},
                   {"seed", cfg.seed}};
    j["fractions"] = res.fractions;
    j["thresholds"] = res.thresholds;
    j["range_axis_fractions"] = res.range_axis_fractions;
    j["used_trials"] = res.used_trials;
    j["skipped_trials"] = res.skipped_trials;
    j["empirical_covariance"] = matrix_json(res.empirical_covariance);
    j["analytic_covariance_example"] = matrix_json(res.example_covariance);
    write_text(dir / "validation.json", j.dump(2) + "\n");

    std::string csv = "trial,ex,ey,ez,mahalanobis2,range_axis_z,skipped\n";
    for (std::size_t i = 0; i < res.trials.size(); ++i) {
        const auto& t = res.trials[i];
        csv += fmt::format("{},{},{},{},{},{},{}\n", i, g17(t.error_p.x()), g17(t.error_p.y()), g17(t.error_p.z()),
                           g17(t.mahalanobis2), g17(t.range_axis_z), t.skipped ? 1 : 0);
    }
    write_text(dir / "validation_trials.csv", csv);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

void write_plot_data(const std::filesystem::path& campaign_dir, const std::filesystem::path& out_dir) {
    const auto runs_dir = campaign_dir / "runs";
    if (!std::filesystem::exists(campaign_dir / "summary.json")) {
        throw Error(ErrorCode::IoError, "no summary.json in " + campaign_dir.string());
    }
    std::filesystem::create_directories(out_dir);

    // Long-format estimation errors and sigmas, one row per (run, step, component).
    std::vector<std::filesystem::path> files;
    if (std::filesystem::exists(runs_dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
            if (entry.path().extension() == ".csv") files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    static const char* comp[6] = {"x", "y", "z", "vx", "vy", "vz"};
    std::string tidy = "run,t,ta_deg,event,component,error,sigma\n";
    for (const auto& f : files) {
        const std::string stem = f.stem().string();
        const int run = std::stoi(stem.substr(stem.find('_') + 1));
        std::ifstream in(f);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            const auto c = split_csv(line);
            if (c.size() < 25 || c[23] != "1") continue;
            for (int k = 0; k < 6; ++k) {
                const double err = std::stod(c[9 + k]) - std::stod(c[3 + k]);
                tidy += fmt::format("{},{},{},{},{},{},{}\n", run, c[0], c[1], c[2], comp[k], g17(err), c[15 + k]);
            }
        }
    }
    write_text(out_dir / "filter_errors_long.csv", tidy);

    std::ifstream sin(campaign_dir / "summary.json");
    json summary;
    sin >> summary;
    std::string prof = "ta_deg,sigma_vz_kms\n";
    for (const auto& p : summary["sigma_vz_profile"]) prof += fmt::format("{},{}\n", g17(p[0]), g17(p[1]));
    write_text(out_dir / "sigma_vz_vs_ta.csv", prof);

    std::string yearly = "run,yearly_dv_cms,success\n";
    for (const auto& r : summary["runs"]) {
        yearly += fmt::format("{},{},{}\n", r["index"].get<int>(), g17(r["yearly_dv_cms"].get<double>()),
                              r["success"].get<bool>() ? 1 : 0);
    }
    write_text(out_dir / "yearly_dv.csv", yearly);

    if (std::filesystem::exists(campaign_dir / "maneuvers.csv")) {
        std::filesystem::copy_file(campaign_dir / "maneuvers.csv", out_dir / "maneuvers.csv",
                                   std::filesystem::copy_options::overwrite_existing);
    }
}

}  // namespace nrhonav
