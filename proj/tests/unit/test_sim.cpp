#include "fixtures.hpp"

#include "nrhonav/core/error.hpp"
#include "nrhonav/core/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nrhonav;
using namespace nrhonav::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ErrorCode config_error_of(const nlohmann::json& j) {
    try {
        (void)ScenarioConfig::from_json(j).validate();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

RunResult make_run(double yearly) {
    RunResult r;
    r.yearly_dv_cms = yearly;
    return r;
}

ScenarioConfig quiet_scenario(ExperimentKind kind, int runs, int revs) {
    ScenarioConfig cfg = ScenarioConfig::defaults_for(kind);
    cfg.campaign.kind = kind;
    cfg.campaign.runs = runs;
    cfg.campaign.revolutions = revs;
    cfg.errors.initial_pos_3sigma_km = 1e-6;
    cfg.errors.initial_vel_3sigma_cms = 1e-6;
    cfg.errors.srp_am_3sigma_rel = 0.0;
    cfg.errors.srp_cr_3sigma_rel = 0.0;
    cfg.errors.od_pos_3sigma_km = 0.0;
    cfg.errors.od_vel_3sigma_cms = 0.0;
    cfg.errors.control_mag_3sigma_rel = 0.0;
    cfg.errors.control_dir_3sigma_deg = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("linear-interpolation percentile") {
    std::vector<double> v;
    RandomStream rng(4);
    for (int i = 0; i < 100; ++i) v.push_back(rng.uniform(0.0, 50.0));
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    // Position (n - 1) p / 100 = 94.05.
    const double expected = sorted[94] + 0.05 * (sorted[95] - sorted[94]);
    CHECK(percentile_linear(v, 95.0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(percentile_linear(v, 0.0) == sorted.front());
    CHECK(percentile_linear(v, 100.0) == sorted.back());
    CHECK(percentile_linear({7.0}, 95.0) == 7.0);
}

TEST_CASE("aggregate statistics of hand-made runs") {
    const AggregateStats one = aggregate_report({make_run(33.0)});
    CHECK(one.mean_yearly_dv_cms == 33.0);
    CHECK(one.p95_yearly_dv_cms == 33.0);
    CHECK(one.max_yearly_dv_cms == 33.0);

    const AggregateStats four = aggregate_report({make_run(10), make_run(20), make_run(30), make_run(40)});
    CHECK(four.mean_yearly_dv_cms == 25.0);
    CHECK(four.median_yearly_dv_cms == 25.0);
    CHECK(four.max_yearly_dv_cms == 40.0);
    CHECK(four.p95_yearly_dv_cms == doctest::Approx(38.5));
    CHECK(four.success_rate == 1.0);
    CHECK(std::isnan(four.sigma_vz_argmin_ta_deg));
}

TEST_CASE("scenario configuration") {
    SUBCASE("JSON round trip") {
        ScenarioConfig cfg = ScenarioConfig::defaults_for(ExperimentKind::FullPipeline);
        cfg.controller.method = ControlMethod::UtSlmp;
        cfg.controller.burn_ta_deg = 175.0;
        cfg.filter.type = FilterType::UKF;
        cfg.camera.model.focal_length_mm = 450.0;
        cfg.measurements.true_anomalies_deg = {140.0, 150.0, 210.0};
        cfg.campaign.seed = 123456789012345ULL;
        const ScenarioConfig back = ScenarioConfig::from_json(cfg.to_json());
        CHECK(back.to_json() == cfg.to_json());
        CHECK(back.controller.method == ControlMethod::UtSlmp);
        CHECK(back.campaign.seed == 123456789012345ULL);
    }
    SUBCASE("kind defaults") {
        const auto f = ScenarioConfig::defaults_for(ExperimentKind::FilterOnly);
        CHECK(f.campaign.runs == 10);
        CHECK(f.campaign.revolutions == 10);
        const auto p = ScenarioConfig::defaults_for(ExperimentKind::FullPipeline);
        CHECK(p.campaign.runs == 20);
        CHECK(p.campaign.revolutions == 60);
        CHECK(p.controller.vx_trig_ms == 20.0);
    }
    SUBCASE("overlay keeps unspecified fields") {
        ScenarioConfig base;
        base.campaign.runs = 77;
        const ScenarioConfig c = ScenarioConfig::from_json(nlohmann::json{{"campaign", {{"seed", 5}}}}, base);
        CHECK(c.campaign.runs == 77);
        CHECK(c.campaign.seed == 5);
    }
    SUBCASE("camera preset") {
        const ScenarioConfig c = ScenarioConfig::from_json(nlohmann::json{{"camera", {{"preset_mm", 450}}}});
        CHECK(c.camera.model.focal_length_mm == 450.0);
        CHECK(c.measurements.true_anomalies_deg.size() == 3);
        CHECK(config_error_of({{"camera", {{"preset_mm", 400}}}}) == ErrorCode::ConfigError);
    }
    SUBCASE("invalid values") {
        CHECK(config_error_of({{"measurements", {{"true_anomalies_deg", {200.0, 150.0}}}}}) == ErrorCode::ConfigError);
        CHECK(config_error_of({{"measurements", {{"true_anomalies_deg", {370.0}}}}}) == ErrorCode::ConfigError);
        CHECK(config_error_of({{"errors", {{"od_pos_3sigma_km", -1.0}}}}) == ErrorCode::ConfigError);
        CHECK(config_error_of({{"filter", {{"type", "PF"}}}}) == ErrorCode::ConfigError);
        CHECK(config_error_of({{"campaign", {{"kind", "nonsense"}}}}) == ErrorCode::ConfigError);
        CHECK(config_error_of({{"controller", {{"burn_ta_deg", 360.0}}}}) == ErrorCode::ConfigError);
        CHECK(config_error_of({{"camera", "wide"}}) == ErrorCode::ConfigError);
    }
}

TEST_CASE("error injection matches the configured three-sigma values") {
    constexpr int n = 10000;
    SUBCASE("initial state error") {
        RandomStream rng(21);
        const double sp = 10.0 / 3.0, sv = 1e-4 / 3.0;
        double s2p = 0.0, s2v = 0.0;
        for (int i = 0; i < n; ++i) {
            const Vec6 e = sample_state_error(rng, sp, sv);
            s2p += e.head<3>().squaredNorm();
            s2v += e.tail<3>().squaredNorm();
        }
        CHECK(3.0 * std::sqrt(s2p / (3.0 * n)) == doctest::Approx(10.0).epsilon(0.02));
        CHECK(3.0 * std::sqrt(s2v / (3.0 * n)) == doctest::Approx(1e-4).epsilon(0.02));
    }
    SUBCASE("execution error") {
        RandomStream rng(22);
        const ErrorModel em;
        const Vec3 u(3e-4, -1e-4, 2e-4);
        double s2m = 0.0, s2a = 0.0;
        Mat3 emp = Mat3::Zero();
        for (int i = 0; i < n; ++i) {
            const Vec3 ue = apply_execution_error(u, rng, em);
            const double rel = ue.norm() / u.norm() - 1.0;
            const double ang = std::acos(std::clamp(ue.normalized().dot(u.normalized()), -1.0, 1.0));
            s2m += rel * rel;
            s2a += ang * ang;
            emp += (ue - u) * (ue - u).transpose() / n;
        }
        CHECK(3.0 * std::sqrt(s2m / n) == doctest::Approx(em.control_mag_3sigma_rel).epsilon(0.02));
        // The rotation is about a single perpendicular axis, so the angle is |N(0, sigma)|.
        CHECK(3.0 * std::sqrt(s2a / n) * constants::kRadToDeg == doctest::Approx(em.control_dir_3sigma_deg).epsilon(0.02));
        const Mat3 model = execution_covariance(u, em);
        CHECK((emp - model).norm() < 0.05 * model.norm());
        CHECK(apply_execution_error(Vec3::Zero(), rng, em).norm() == 0.0);
    }
}

TEST_CASE("noiseless filter loop tracks the truth") {
    ScenarioConfig cfg = quiet_scenario(ExperimentKind::FilterOnly, 1, 2);
    cfg.camera.model.sigma_pix = 1e-9;
    cfg.camera.model.sigma_phi_rad = 1e-15;
    cfg.filter.process.sigma_u = 1e-12;
    const MonteCarloReport rep = run_filter_experiment(cfg, enriched_reference());
    const RunResult& r = rep.runs.front();
    REQUIRE(r.success);
    CHECK(r.measurements_used == 6);
    CHECK(r.measurements_skipped == 0);
    for (const auto& row : r.series) {
        if (!row.has_covariance) continue;
        CHECK((row.truth.head<3>() - row.estimate.head<3>()).norm() < 1e-3);
    }
}

TEST_CASE("a measurement at perilune with a narrow camera is skipped") {
    ScenarioConfig cfg = quiet_scenario(ExperimentKind::FilterOnly, 1, 1);
    cfg.measurements.true_anomalies_deg = {0.0, 180.0};
    const MonteCarloReport rep = run_filter_experiment(cfg, enriched_reference());
    const RunResult& r = rep.runs.front();
    REQUIRE(r.success);
    CHECK(r.measurements_skipped >= 1);
    CHECK(r.measurements_used >= 1);
    const bool has_skip = std::any_of(r.series.begin(), r.series.end(),
                                      [](const SeriesRow& s) { return s.kind == RowKind::Skipped; });
    CHECK(has_skip);
}

TEST_CASE("an orbit started on the reference needs no maneuvers") {
    ScenarioConfig cfg = quiet_scenario(ExperimentKind::ControlOnly, 1, 10);
    cfg.errors.initial_pos_3sigma_km = 0.0;
    cfg.errors.initial_vel_3sigma_cms = 0.0;
    const MonteCarloReport rep = run_control_experiment(cfg, enriched_reference());
    const RunResult& r = rep.runs.front();
    REQUIRE(r.success);
    CHECK(r.maneuvers.size() >= 9);
    for (const auto& m : r.maneuvers) {
        CHECK_FALSE(m.triggered);
        CHECK(std::abs(m.predicted_violation_ms) < cfg.controller.vx_trig_ms);
    }
    CHECK(r.cumulative_dv_cms == 0.0);
}

TEST_CASE("executed maneuvers differ from commands by the sampled error only") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for(ExperimentKind::ControlOnly);
    cfg.campaign.runs = 1;
    cfg.campaign.revolutions = 8;
    const MonteCarloReport rep = run_control_experiment(cfg, enriched_reference());
    const RunResult& r = rep.runs.front();
    REQUIRE(r.success);
    int triggered = 0;
    for (const auto& m : r.maneuvers) {
        if (!m.triggered) {
            CHECK(m.executed_ms == 0.0);
            continue;
        }
        ++triggered;
        CHECK(std::abs(m.executed_ms / m.commanded_ms - 1.0) < 0.06);
    }
    CHECK(triggered > 0);

    ScenarioConfig exact = cfg;
    exact.errors.control_mag_3sigma_rel = 0.0;
    exact.errors.control_dir_3sigma_deg = 0.0;
    const RunResult e = run_control_experiment(exact, enriched_reference()).runs.front();
    REQUIRE(!e.maneuvers.empty());
    for (const auto& m : e.maneuvers) CHECK(m.executed_ms == doctest::Approx(m.commanded_ms).epsilon(1e-12));
}

TEST_CASE("filter-only campaign is statistically consistent") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for(ExperimentKind::FilterOnly);
    cfg.campaign.runs = 30;
    cfg.campaign.revolutions = 10;
    cfg.campaign.write_series = false;
    const MonteCarloReport ekf = run_filter_experiment(cfg, enriched_reference());
    CHECK(ekf.aggregate.success_rate == 1.0);
    CHECK(ekf.aggregate.containment_3sigma >= 0.95);

    cfg.campaign.runs = 10;
    const MonteCarloReport ekf10 = run_filter_experiment(cfg, enriched_reference());
    cfg.filter.type = FilterType::UKF;
    const MonteCarloReport ukf10 = run_filter_experiment(cfg, enriched_reference());
    CHECK(ukf10.aggregate.success_rate == 1.0);
    CHECK(std::abs(ukf10.aggregate.rms_position_error_km / ekf10.aggregate.rms_position_error_km - 1.0) < 0.2);
}

TEST_CASE("controller activeness in short campaigns") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for(ExperimentKind::ControlOnly);
    cfg.campaign.runs = 3;
    cfg.campaign.revolutions = 12;
    cfg.campaign.write_series = false;
    cfg.controller.vx_trig_ms = 10.0;
    cfg.controller.vx_tol_ms = 10.0;

    // SLMP aims at the shrunk tolerance v' = safety * v_tol and lands between v'/2 and v_tol.
    const double tol_prime = cfg.controller.safety * cfg.controller.vx_tol_ms;
    cfg.controller.method = ControlMethod::SLMP;
    const MonteCarloReport slmp = run_control_experiment(cfg, enriched_reference());
    int n = 0, on_boundary = 0;
    for (const auto& r : slmp.runs) {
        for (const auto& m : r.maneuvers) {
            if (!m.triggered) continue;
            ++n;
            const double a = std::abs(m.achieved_violation_ms);
            if (a >= 0.5 * tol_prime && a <= cfg.controller.vx_tol_ms * (1.0 + 1e-6)) ++on_boundary;
        }
    }
    REQUIRE(n > 0);
    CHECK(static_cast<double>(on_boundary) / n >= 0.9);

    cfg.controller.method = ControlMethod::DC;
    const MonteCarloReport dc = run_control_experiment(cfg, enriched_reference());
    n = 0;
    int small = 0;
    for (const auto& r : dc.runs) {
        for (const auto& m : r.maneuvers) {
            if (!m.triggered) continue;
            ++n;
            // DC overshoots to well below the band SLMP lands in.
            if (std::abs(m.achieved_violation_ms) < 0.5 * tol_prime) ++small;
        }
    }
    REQUIRE(n > 0);
    CHECK(static_cast<double>(small) / n >= 0.9);
}

TEST_CASE("reports are byte-identical for identical inputs") {
    ScenarioConfig cfg = ScenarioConfig::defaults_for(ExperimentKind::FullPipeline);
    cfg.campaign.runs = 2;
    cfg.campaign.revolutions = 4;
    cfg.campaign.workers = 2;
    const auto root = fs::temp_directory_path() / "nrhonav_determinism";
    fs::remove_all(root);
    write_report(run_full_pipeline(cfg, enriched_reference()), root / "a");
    cfg.campaign.workers = 1;
    write_report(run_full_pipeline(cfg, enriched_reference()), root / "b");
    int compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), root / "a");
        REQUIRE(fs::exists(root / "b" / rel));
        CHECK(slurp(entry.path()) == slurp(root / "b" / rel));
        ++compared;
    }
    CHECK(compared >= 3);

    write_plot_data(root / "a", root / "plot");
    CHECK(fs::exists(root / "plot"));
    CHECK(!fs::is_empty(root / "plot"));
    fs::remove_all(root);
}
