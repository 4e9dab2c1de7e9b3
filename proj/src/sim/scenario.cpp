#include "nrhonav/sim/scenario.hpp"

#include "nrhonav/core/constants.hpp"
#include "nrhonav/core/error.hpp"

#include <algorithm>
#include <fstream>

namespace nrhonav {

using nlohmann::json;

const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::FilterOnly: return "filter-only";
        case ExperimentKind::ControlOnly: return "control-only";
        case ExperimentKind::FullPipeline: return "full-pipeline";
        case ExperimentKind::ValidateCovariance: return "validate-covariance";
    }
    return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    for (auto k : {ExperimentKind::FilterOnly, ExperimentKind::ControlOnly, ExperimentKind::FullPipeline,
                   ExperimentKind::ValidateCovariance}) {
        if (s == to_string(k)) return k;
    }
    throw Error(ErrorCode::ConfigError, "unknown experiment kind '" + s + "'");
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
    if (!j.is_object()) return;
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("bad value for '") + key + "': " + e.what());
    }
}

const json& section(const json& j, const char* key) {
    static const json empty = json::object();
    if (!j.is_object()) return empty;
    const auto it = j.find(key);
    if (it == j.end()) return empty;
    if (!it->is_object()) throw Error(ErrorCode::ConfigError, std::string("section '") + key + "' must be an object");
    return *it;
}

FilterType filter_type_from_string(const std::string& s) {
    if (s == "EKF") return FilterType::EKF;
    if (s == "UKF") return FilterType::UKF;
    throw Error(ErrorCode::ConfigError, "unknown filter type '" + s + "'");
}

void check_sorted_anomalies(const std::vector<double>& v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] >= 0.0 && v[i] < 360.0)) {
            throw Error(ErrorCode::ConfigError, std::string(what) + " must lie in [0, 360)");
        }
        if (i > 0 && !(v[i] > v[i - 1])) {
            throw Error(ErrorCode::ConfigError, std::string(what) + " must be strictly increasing");
        }
    }
}

}  // namespace

void ErrorModel::validate() const {
    for (double x : {initial_pos_3sigma_km, initial_vel_3sigma_cms, od_pos_3sigma_km, od_vel_3sigma_cms,
                     control_mag_3sigma_rel, control_dir_3sigma_deg, srp_am_3sigma_rel, srp_cr_3sigma_rel}) {
        if (!(x >= 0.0)) throw Error(ErrorCode::ConfigError, "error-model values must be >= 0");
    }
}

void ScenarioConfig::validate() const {
    camera.model.validate();
    if (!(camera.shape.a > 0 && camera.shape.b > 0 && camera.shape.c > 0)) {
        throw Error(ErrorCode::ConfigError, "body semi-axes must be positive");
    }
    if (!(camera.sector_deg > 0.0 && camera.sector_deg <= 360.0)) {
        throw Error(ErrorCode::ConfigError, "sector must be in (0, 360]");
    }
    if (camera.m_min < 3 || camera.m_max < camera.m_min) throw Error(ErrorCode::ConfigError, "bad limb point limits");
    check_sorted_anomalies(measurements.true_anomalies_deg, "measurement true anomalies");
    check_sorted_anomalies(measurements.sample_true_anomalies_deg, "sample true anomalies");
    filter.process.validate();
    filter.ut.validate();
    controller.validate();
    if (!(controller.burn_ta_deg >= 0.0 && controller.burn_ta_deg < 360.0)) {
        throw Error(ErrorCode::ConfigError, "burn true anomaly must lie in [0, 360)");
    }
    errors.validate();
    dynamics.integrator.validate();
    if (campaign.runs < 1) throw Error(ErrorCode::ConfigError, "runs must be >= 1");
    if (campaign.revolutions < 1) throw Error(ErrorCode::ConfigError, "revolutions must be >= 1");
    if (campaign.workers < 1) throw Error(ErrorCode::ConfigError, "workers must be >= 1");
    if (ephemeris.truth_mode == EphemerisMode::Table && ephemeris.table_earth_csv.empty()) {
        throw Error(ErrorCode::ConfigError, "table ephemeris needs ephemeris.table_earth_csv");
    }
}

ScenarioConfig ScenarioConfig::defaults_for(ExperimentKind kind) {
    ScenarioConfig c;
    c.campaign.kind = kind;
    if (kind == ExperimentKind::ControlOnly || kind == ExperimentKind::FullPipeline) {
        c.campaign.runs = 20;
        c.campaign.revolutions = 60;
    }
    if (kind == ExperimentKind::FullPipeline) c.controller.vx_trig_ms = 20.0;
    if (kind == ExperimentKind::FilterOnly) {
        for (int ta = 120; ta <= 240; ta += 5) c.measurements.sample_true_anomalies_deg.push_back(ta);
    }
    return c;
}

ScenarioConfig ScenarioConfig::from_json(const json& j, ScenarioConfig base) {
    ScenarioConfig c = std::move(base);

    const json& e = section(j, "ephemeris");
    std::string mode;
    read(e, "truth_mode", mode);
    if (!mode.empty()) c.ephemeris.truth_mode = ephemeris_mode_from_string(mode);
    mode.clear();
    read(e, "reference_mode", mode);
    if (!mode.empty()) c.ephemeris.reference_mode = ephemeris_mode_from_string(mode);
    read(e, "table_earth_csv", c.ephemeris.table_earth_csv);
    read(e, "table_sun_csv", c.ephemeris.table_sun_csv);

    const json& d = section(j, "dynamics");
    read(d, "j2", c.dynamics.j2);
    read(d, "sun", c.dynamics.sun);
    const json& srp = section(d, "srp");
    read(srp, "enabled", c.dynamics.srp.enabled);
    read(srp, "cr", c.dynamics.srp.cr);
    read(srp, "area_to_mass_m2_kg", c.dynamics.srp.area_to_mass_m2_kg);
    const json& integ = section(d, "integrator");
    read(integ, "abs_tol", c.dynamics.integrator.abs_tol);
    read(integ, "rel_tol", c.dynamics.integrator.rel_tol);
    read(integ, "max_steps", c.dynamics.integrator.max_steps);

    const json& cam = section(j, "camera");
    if (cam.contains("preset_mm")) {
        const double f = cam["preset_mm"].get<double>();
        const auto& presets = camera_presets();
        const auto it = std::find_if(presets.begin(), presets.end(),
                                     [f](const CameraPreset& p) { return p.focal_length_mm == f; });
        if (it == presets.end()) throw Error(ErrorCode::ConfigError, "unknown camera preset");
        c.camera.model.focal_length_mm = it->focal_length_mm;
        c.measurements.true_anomalies_deg = it->three_measurements;
    }
    read(cam, "focal_length_mm", c.camera.model.focal_length_mm);
    read(cam, "sensor_width_mm", c.camera.model.sensor_width_mm);
    read(cam, "sensor_height_mm", c.camera.model.sensor_height_mm);
    read(cam, "pixels_u", c.camera.model.pixels_u);
    read(cam, "pixels_v", c.camera.model.pixels_v);
    read(cam, "sigma_pix", c.camera.model.sigma_pix);
    double sigma_phi_arcsec = c.camera.model.sigma_phi_rad / constants::kArcsecToRad;
    read(cam, "sigma_phi_arcsec", sigma_phi_arcsec);
    c.camera.model.sigma_phi_rad = sigma_phi_arcsec * constants::kArcsecToRad;
    read(cam, "sector_deg", c.camera.sector_deg);
    read(cam, "density", c.camera.density);
    read(cam, "m_min", c.camera.m_min);
    read(cam, "m_max", c.camera.m_max);
    read(cam, "center_anti_sun", c.camera.center_anti_sun);
    const json& shape = section(cam, "shape");
    read(shape, "a", c.camera.shape.a);
    read(shape, "b", c.camera.shape.b);
    read(shape, "c", c.camera.shape.c);

    const json& m = section(j, "measurements");
    read(m, "true_anomalies_deg", c.measurements.true_anomalies_deg);
    read(m, "sample_true_anomalies_deg", c.measurements.sample_true_anomalies_deg);

    const json& f = section(j, "filter");
    std::string ftype;
    read(f, "type", ftype);
    if (!ftype.empty()) c.filter.type = filter_type_from_string(ftype);
    read(f, "sigma_u", c.filter.process.sigma_u);
    const json& ut = section(f, "ut");
    read(ut, "alpha", c.filter.ut.alpha);
    read(ut, "kappa", c.filter.ut.kappa);
    read(ut, "beta", c.filter.ut.beta);
    read(ut, "literal_w0c", c.filter.ut.literal_w0c);
    if (f.contains("gate_chi2") && !f["gate_chi2"].is_null()) c.filter.gate_chi2 = f["gate_chi2"].get<double>();

    const json& k = section(j, "controller");
    std::string method;
    read(k, "method", method);
    if (!method.empty()) c.controller.method = control_method_from_string(method);
    read(k, "target_perilune", c.controller.target_perilune);
    read(k, "vx_trig_ms", c.controller.vx_trig_ms);
    read(k, "vx_tol_ms", c.controller.vx_tol_ms);
    read(k, "safety", c.controller.safety);
    read(k, "max_iter", c.controller.max_iter);
    read(k, "burn_ta_deg", c.controller.burn_ta_deg);
    read(k, "ut_common_epoch", c.controller.ut_common_epoch);
    c.controller.ut = c.filter.ut;
    const json& kut = section(k, "ut");
    read(kut, "alpha", c.controller.ut.alpha);
    read(kut, "kappa", c.controller.ut.kappa);
    read(kut, "beta", c.controller.ut.beta);
    read(kut, "literal_w0c", c.controller.ut.literal_w0c);

    const json& er = section(j, "errors");
    read(er, "initial_pos_3sigma_km", c.errors.initial_pos_3sigma_km);
    read(er, "initial_vel_3sigma_cms", c.errors.initial_vel_3sigma_cms);
    read(er, "od_pos_3sigma_km", c.errors.od_pos_3sigma_km);
    read(er, "od_vel_3sigma_cms", c.errors.od_vel_3sigma_cms);
    read(er, "control_mag_3sigma_rel", c.errors.control_mag_3sigma_rel);
    read(er, "control_dir_3sigma_deg", c.errors.control_dir_3sigma_deg);
    read(er, "srp_am_3sigma_rel", c.errors.srp_am_3sigma_rel);
    read(er, "srp_cr_3sigma_rel", c.errors.srp_cr_3sigma_rel);
    read(er, "inflate_at_maneuver", c.errors.inflate_at_maneuver);

    const json& cp = section(j, "campaign");
    std::string kind;
    read(cp, "kind", kind);
    if (!kind.empty()) c.campaign.kind = experiment_kind_from_string(kind);
    read(cp, "runs", c.campaign.runs);
    read(cp, "revolutions", c.campaign.revolutions);
    read(cp, "seed", c.campaign.seed);
    read(cp, "workers", c.campaign.workers);
    read(cp, "out_dir", c.campaign.out_dir);
    read(cp, "reference_csv", c.campaign.reference_csv);
    read(cp, "reference_json", c.campaign.reference_json);
    read(cp, "reference_revolutions", c.campaign.reference_revolutions);
    read(cp, "write_series", c.campaign.write_series);
    read(cp, "filter_truth_station_keeping", c.campaign.filter_truth_station_keeping);
    read(cp, "validation_range_km", c.campaign.validation_range_km);
    read(cp, "validation_m", c.campaign.validation_m);
    read(cp, "validation_trials", c.campaign.validation_trials);

    c.validate();
    return c;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path, ScenarioConfig base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, "cannot parse " + path.string() + ": " + e.what());
    }
    return from_json(j, std::move(base));
}

json ScenarioConfig::to_json() const {
    json j;
    j["ephemeris"] = {{"truth_mode", nrhonav::to_string(ephemeris.truth_mode)},
                      {"reference_mode", nrhonav::to_string(ephemeris.reference_mode)},
                      {"table_earth_csv", ephemeris.table_earth_csv},
                      {"table_sun_csv", ephemeris.table_sun_csv}};
    j["dynamics"] = {{"j2", dynamics.j2},
                     {"sun", dynamics.sun},
                     {"srp",
                      {{"enabled", dynamics.srp.enabled},
                       {"cr", dynamics.srp.cr},
                       {"area_to_mass_m2_kg", dynamics.srp.area_to_mass_m2_kg}}},
                     {"integrator",
                      {{"abs_tol", dynamics.integrator.abs_tol},
                       {"rel_tol", dynamics.integrator.rel_tol},
                       {"max_steps", dynamics.integrator.max_steps}}}};
    j["camera"] = {{"focal_length_mm", camera.model.focal_length_mm},
                   {"sensor_width_mm", camera.model.sensor_width_mm},
                   {"sensor_height_mm", camera.model.sensor_height_mm},
                   {"pixels_u", camera.model.pixels_u},
                   {"pixels_v", camera.model.pixels_v},
                   {"sigma_pix", camera.model.sigma_pix},
                   {"sigma_phi_arcsec", camera.model.sigma_phi_rad / constants::kArcsecToRad},
                   {"sector_deg", camera.sector_deg},
                   {"density", camera.density},
                   {"m_min", camera.m_min},
                   {"m_max", camera.m_max},
                   {"center_anti_sun", camera.center_anti_sun},
                   {"shape", {{"a", camera.shape.a}, {"b", camera.shape.b}, {"c", camera.shape.c}}}};
    j["measurements"] = {{"true_anomalies_deg", measurements.true_anomalies_deg},
                         {"sample_true_anomalies_deg", measurements.sample_true_anomalies_deg}};
    j["filter"] = {{"type", filter.type == FilterType::EKF ? "EKF" : "UKF"},
                   {"sigma_u", filter.process.sigma_u},
                   {"ut",
                    {{"alpha", filter.ut.alpha},
                     {"kappa", filter.ut.kappa},
                     {"beta", filter.ut.beta},
                     {"literal_w0c", filter.ut.literal_w0c}}},
                   {"gate_chi2", filter.gate_chi2 ? json(*filter.gate_chi2) : json(nullptr)}};
    j["controller"] = {{"method", nrhonav::to_string(controller.method)},
                       {"target_perilune", controller.target_perilune},
                       {"vx_trig_ms", controller.vx_trig_ms},
                       {"vx_tol_ms", controller.vx_tol_ms},
                       {"safety", controller.safety},
                       {"max_iter", controller.max_iter},
                       {"burn_ta_deg", controller.burn_ta_deg},
                       {"ut_common_epoch", controller.ut_common_epoch},
                       {"ut",
                        {{"alpha", controller.ut.alpha},
                         {"kappa", controller.ut.kappa},
                         {"beta", controller.ut.beta},
                         {"literal_w0c", controller.ut.literal_w0c}}}};
    j["errors"] = {{"initial_pos_3sigma_km", errors.initial_pos_3sigma_km},
                   {"initial_vel_3sigma_cms", errors.initial_vel_3sigma_cms},
                   {"od_pos_3sigma_km", errors.od_pos_3sigma_km},
                   {"od_vel_3sigma_cms", errors.od_vel_3sigma_cms},
                   {"control_mag_3sigma_rel", errors.control_mag_3sigma_rel},
                   {"control_dir_3sigma_deg", errors.control_dir_3sigma_deg},
                   {"srp_am_3sigma_rel", errors.srp_am_3sigma_rel},
                   {"srp_cr_3sigma_rel", errors.srp_cr_3sigma_rel},
                   {"inflate_at_maneuver", errors.inflate_at_maneuver}};
    j["campaign"] = {{"kind", nrhonav::to_string(campaign.kind)},
                     {"runs", campaign.runs},
                     {"revolutions", campaign.revolutions},
                     {"seed", campaign.seed},
                     {"workers", campaign.workers},
                     {"out_dir", campaign.out_dir},
                     {"reference_csv", campaign.reference_csv},
                     {"reference_json", campaign.reference_json},
                     {"reference_revolutions", campaign.reference_revolutions},
                     {"write_series", campaign.write_series},
                     {"filter_truth_station_keeping", campaign.filter_truth_station_keeping},
                     {"validation_range_km", campaign.validation_range_km},
                     {"validation_m", campaign.validation_m},
                     {"validation_trials", campaign.validation_trials}};
    return j;
}

const std::vector<CameraPreset>& camera_presets() {
    static const std::vector<CameraPreset> presets{
        {300.0, {140.0, 150.0, 220.0}, {140.0, 145.0, 150.0, 220.0}},
        {360.0, {145.0, 155.0, 215.0}, {145.0, 150.0, 155.0, 215.0}},
        {450.0, {150.0, 160.0, 210.0}, {150.0, 155.0, 160.0, 210.0}},
        {550.0, {155.0, 165.0, 205.0}, {155.0, 160.0, 165.0, 205.0}},
    };
    return presets;
}

}  // namespace nrhonav
