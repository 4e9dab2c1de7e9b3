#pragma once

/**
 * @file campaign.hpp
 * @brief Closed-loop Monte-Carlo runs: truth, measurements, filter, control.
 *
 * Each run owns its random substreams (derived from the campaign seed and the
 * run index) and its own truth model, so runs can execute on any worker in any
 * order and still give identical results. Reports are reduced in run order.
 */

#include "nrhonav/sim/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace nrhonav {

enum class RowKind { Start, Prior, Posterior, Skipped, Sample, Burn, Perilune, End };
const char* to_string(RowKind k);

/// One recorded step of a run.
struct SeriesRow {
    Epoch t;
    double ta_deg = 0.0;
    RowKind kind = RowKind::Start;
    Vec6 truth = Vec6::Zero();
    Vec6 estimate = Vec6::Zero();
    Vec6 sigma = Vec6::Zero();   ///< sqrt of the covariance diagonal, km and km/s (zero without a filter)
    int limb_points = 0;
    double dv_ms = 0.0;
    bool has_covariance = false;
    double mahalanobis2_pos = 0.0;
};

struct ManeuverRecord {
    Epoch t;
    double ta_deg = 0.0;
    bool triggered = false;
    bool converged = true;
    int iterations = 0;
    double commanded_ms = 0.0;
    double executed_ms = 0.0;
    double predicted_violation_ms = 0.0;
    double achieved_violation_ms = 0.0;
};

struct RunResult {
    int index = 0;
    bool success = true;
    std::string failure;
    double duration_s = 0.0;
    double cumulative_dv_cms = 0.0;
    double yearly_dv_cms = 0.0;
    int measurements_used = 0;
    int measurements_skipped = 0;
    int filter_steps = 0;          ///< rows with a covariance
    int inside_3sigma = 0;         ///< of those, truth inside the 3-sigma position ellipsoid
    double rms_position_error_km = 0.0;
    double min_perilune_km = 0.0;
    double max_perilune_km = 0.0;
    std::vector<ManeuverRecord> maneuvers;
    std::vector<SeriesRow> series;
};

struct AggregateStats {
    int runs = 0;
    double mean_yearly_dv_cms = 0.0;
    double median_yearly_dv_cms = 0.0;
    double p95_yearly_dv_cms = 0.0;
    double max_yearly_dv_cms = 0.0;
    double success_rate = 0.0;
    double mean_iterations = 0.0;      ///< over triggered maneuvers
    double maneuvers_per_run = 0.0;    ///< triggered maneuvers
    double containment_3sigma = 0.0;   ///< fraction over all runs' filter steps
    double rms_position_error_km = 0.0;
    /// True anomaly of the smallest mean sigma_vz among sample rows in [120, 240] deg; NaN without samples.
    double sigma_vz_argmin_ta_deg = 0.0;
};

struct MonteCarloReport {
    ScenarioConfig config;
    std::vector<RunResult> runs;
    AggregateStats aggregate;
};

/// Percentile with linear interpolation between order statistics (p in [0, 100]).
double percentile_linear(std::vector<double> values, double p);

/// Mean, median, 95th percentile, max, success rate and filter statistics.
AggregateStats aggregate_report(const std::vector<RunResult>& runs);

/// Mean sigma_vz per integer true anomaly over the sample rows of all runs.
std::vector<std::pair<double, double>> sigma_vz_profile(const std::vector<RunResult>& runs);

/// Zero-mean Gaussian state error with the given one-sigma values.
Vec6 sample_state_error(RandomStream& rng, double pos_sigma_km, double vel_sigma_kms);

/// Executed maneuver: relative magnitude error and a rotation about an axis perpendicular to u.
Vec3 apply_execution_error(const Vec3& u, RandomStream& rng, const ErrorModel& em);

/// Execution-error covariance [km^2/s^2] of a commanded u, frame I.
Mat3 execution_covariance(const Vec3& u, const ErrorModel& em);

/// Generates the reference in the configured reference model. With a zero
/// revolution count the campaign length plus N + 3 revolutions is used.
ReferenceOrbit generate_campaign_reference(const ScenarioConfig& cfg, SeedSource preferred, int revolutions = 0);

/// Loads the reference when the campaign names existing files, otherwise generates it.
std::shared_ptr<const ReferenceOrbit> build_reference(const ScenarioConfig& cfg);

/// Ephemeris and dynamics factories used by the harness and the CLI.
std::shared_ptr<const EphemerisProvider> make_ephemeris(EphemerisMode mode, const EphemerisConfig& cfg);
std::shared_ptr<DynamicsModel> make_truth_model(const ScenarioConfig& cfg,
                                                std::shared_ptr<const EphemerisProvider> eph);
std::shared_ptr<DynamicsModel> make_reference_model(const ScenarioConfig& cfg);

class Campaign {
public:
    explicit Campaign(ScenarioConfig cfg, std::shared_ptr<const ReferenceOrbit> reference = nullptr);

    [[nodiscard]] const ScenarioConfig& config() const { return cfg_; }
    [[nodiscard]] const ReferenceOrbit& reference() const { return *reference_; }

    [[nodiscard]] RunResult run_one(int index) const;
    [[nodiscard]] MonteCarloReport run() const;

private:
    ScenarioConfig cfg_;
    std::shared_ptr<const ReferenceOrbit> reference_;
    std::shared_ptr<const EphemerisProvider> truth_eph_;
    std::shared_ptr<const DynamicsModel> filter_model_;
};

MonteCarloReport run_filter_experiment(ScenarioConfig cfg, std::shared_ptr<const ReferenceOrbit> ref = nullptr);
MonteCarloReport run_control_experiment(ScenarioConfig cfg, std::shared_ptr<const ReferenceOrbit> ref = nullptr);
MonteCarloReport run_full_pipeline(ScenarioConfig cfg, std::shared_ptr<const ReferenceOrbit> ref = nullptr);

nlohmann::json report_to_json(const MonteCarloReport& report);

/// summary.json, maneuvers.csv and (optionally) runs/run_NNNN.csv under `dir`.
void write_report(const MonteCarloReport& report, const std::filesystem::path& dir);

/// Covariance-validation settings taken from the camera and campaign sections.
ValidationConfig validation_config(const ScenarioConfig& cfg);

/// JSON summary and per-trial CSV of a covariance validation.
void write_validation(const ValidationResult& res, const ValidationConfig& cfg, const std::filesystem::path& dir);

/// Tidy CSVs for plotting, read back from a campaign directory.
void write_plot_data(const std::filesystem::path& campaign_dir, const std::filesystem::path& out_dir);

}  // namespace nrhonav
