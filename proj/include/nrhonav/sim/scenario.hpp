#pragma once

/**
 * @file scenario.hpp
 * @brief Scenario configuration read from JSON.
 *
 * The JSON document has the sections ephemeris, dynamics, camera, measurements,
 * filter, controller, errors and campaign. Every key is optional; missing keys
 * keep the defaults below.
 */

#include "nrhonav/control/control.hpp"
#include "nrhonav/dynamics/dop853.hpp"
#include "nrhonav/filters/filters.hpp"
#include "nrhonav/frames/ephemeris.hpp"
#include "nrhonav/opnav/opnav.hpp"
#include "nrhonav/reference/reference_orbit.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nrhonav {

enum class ExperimentKind { FilterOnly, ControlOnly, FullPipeline, ValidateCovariance };

const char* to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

enum class FilterType { EKF, UKF };

struct EphemerisConfig {
    EphemerisMode truth_mode = EphemerisMode::EnrichedAnalytic;
    EphemerisMode reference_mode = EphemerisMode::EnrichedAnalytic;
    std::string table_earth_csv;  ///< table mode: Earth relative to the Moon
    std::string table_sun_csv;    ///< table mode, optional
};

struct DynamicsConfig {
    bool j2 = true;
    bool sun = true;
    SrpParams srp{true};
    IntegratorConfig integrator;
};

struct CameraConfig {
    CameraModel model;
    BodyShape shape = BodyShape::moon();
    double sector_deg = 140.0;
    double density = 0.25;
    int m_min = 10;
    int m_max = 200;
    bool center_anti_sun = false;
};

struct MeasurementConfig {
    std::vector<double> true_anomalies_deg{145.0, 155.0, 215.0};
    /// True anomalies where the predicted covariance is recorded without an update.
    std::vector<double> sample_true_anomalies_deg;
};

struct FilterConfig {
    FilterType type = FilterType::EKF;
    ProcessNoiseConfig process;
    UtConfig ut;
    std::optional<double> gate_chi2;
};

/// All "3sigma" fields are three-standard-deviation values.
struct ErrorModel {
    double initial_pos_3sigma_km = 10.0;
    double initial_vel_3sigma_cms = 10.0;
    double od_pos_3sigma_km = 5.0;
    double od_vel_3sigma_cms = 3.0;
    double control_mag_3sigma_rel = 0.03;
    double control_dir_3sigma_deg = 1.5;
    double srp_am_3sigma_rel = 0.3;
    double srp_cr_3sigma_rel = 0.15;
    /// Add the execution-error covariance to the filter at each maneuver.
    bool inflate_at_maneuver = false;

    void validate() const;
};

struct CampaignConfig {
    ExperimentKind kind = ExperimentKind::FilterOnly;
    int runs = 10;
    int revolutions = 10;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir = "out";
    std::string reference_csv;   ///< empty: generate in memory
    std::string reference_json;
    int reference_revolutions = 0;  ///< 0: revolutions + N + 3
    bool write_series = true;
    /// Filter-only runs: keep the truth on the orbit with error-free maneuvers
    /// computed from the truth and applied to the filter mean as known inputs.
    /// Without them some runs leave the orbit within ten revolutions.
    bool filter_truth_station_keeping = true;
    // Covariance validation.
    double validation_range_km = 70000.0;
    int validation_m = 100;
    int validation_trials = 10000;
};

struct ScenarioConfig {
    EphemerisConfig ephemeris;
    DynamicsConfig dynamics;
    CameraConfig camera;
    MeasurementConfig measurements;
    FilterConfig filter;
    ControllerConfig controller;
    ErrorModel errors;
    CampaignConfig campaign;

    void validate() const;

    /// Keys present in `j` override the corresponding fields of `base`.
    static ScenarioConfig from_json(const nlohmann::json& j, ScenarioConfig base = {});
    static ScenarioConfig load(const std::filesystem::path& path, ScenarioConfig base = {});

    /// Desk-scale defaults of an experiment kind: filter 10 x 10, control and
    /// pipeline 20 x 60 (the pipeline triggers at 20 m/s). Filter runs also
    /// sample the covariance every 5 deg between 120 and 240 deg.
    static ScenarioConfig defaults_for(ExperimentKind kind);
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Camera of one focal-length row (300, 360, 450 or 550 mm) with its three-measurement true anomalies.
/// A config may select a row with camera.preset_mm, which sets the focal length
/// and the three-measurement true anomalies (explicit keys still win).
struct CameraPreset {
    double focal_length_mm;
    std::vector<double> three_measurements;
    std::vector<double> four_measurements;
};
const std::vector<CameraPreset>& camera_presets();

}  // namespace nrhonav
