#include "nrhonav/core/error.hpp"
#include "nrhonav/sim/campaign.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

using namespace nrhonav;
namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<std::string> out;
    std::optional<int> workers;
};

struct CampaignFlags {
    std::optional<int> revolutions;
    std::optional<std::string> method;
    std::optional<double> burn_ta;
    std::optional<std::string> filter;
    std::optional<double> vx_trig;
    std::optional<double> vx_tol;
    bool no_series = false;
};

ScenarioConfig load_config(const GlobalFlags& g, ExperimentKind kind) {
    ScenarioConfig cfg = ScenarioConfig::defaults_for(kind);
    if (!g.config.empty()) cfg = ScenarioConfig::load(g.config, cfg);
    cfg.campaign.kind = kind;
    if (g.seed) cfg.campaign.seed = *g.seed;
    if (g.runs) cfg.campaign.runs = *g.runs;
    if (g.out) cfg.campaign.out_dir = *g.out;
    if (g.workers) cfg.campaign.workers = *g.workers;
    return cfg;
}

void apply(const CampaignFlags& f, ScenarioConfig& cfg) {
    if (f.revolutions) cfg.campaign.revolutions = *f.revolutions;
    if (f.method) cfg.controller.method = control_method_from_string(*f.method);
    if (f.burn_ta) cfg.controller.burn_ta_deg = *f.burn_ta;
    if (f.vx_trig) cfg.controller.vx_trig_ms = *f.vx_trig;
    if (f.vx_tol) cfg.controller.vx_tol_ms = *f.vx_tol;
    if (f.filter) {
        if (*f.filter == "ekf" || *f.filter == "EKF") {
            cfg.filter.type = FilterType::EKF;
        } else if (*f.filter == "ukf" || *f.filter == "UKF") {
            cfg.filter.type = FilterType::UKF;
        } else {
            throw Error(ErrorCode::ConfigError, "filter must be ekf or ukf");
        }
    }
    if (f.no_series) cfg.campaign.write_series = false;
    cfg.validate();
}

void add_campaign_flags(CLI::App* sub, CampaignFlags& f, bool control, bool filter) {
    sub->add_option("--revolutions", f.revolutions, "Revolutions per run");
    sub->add_flag("--no-series", f.no_series, "Skip the per-run CSV time series");
    if (control) {
        sub->add_option("--method", f.method, "DC, SLMP, UT-DC or UT-SLMP");
        sub->add_option("--burn-ta", f.burn_ta, "Control action true anomaly [deg]");
        sub->add_option("--vx-trig", f.vx_trig, "Trigger threshold [m/s]");
        sub->add_option("--vx-tol", f.vx_tol, "Targeting tolerance [m/s]");
    }
    if (filter) sub->add_option("--filter", f.filter, "ekf or ukf");
}

void print_aggregate(const MonteCarloReport& rep, double seconds) {
    const auto& a = rep.aggregate;
    fmt::print("runs {}  success {:.3f}  time {:.1f} s\n", a.runs, a.success_rate, seconds);
    if (rep.config.campaign.kind != ExperimentKind::FilterOnly) {
        fmt::print("yearly dV [cm/s]: mean {:.2f}  median {:.2f}  p95 {:.2f}  max {:.2f}\n", a.mean_yearly_dv_cms,
                   a.median_yearly_dv_cms, a.p95_yearly_dv_cms, a.max_yearly_dv_cms);
        fmt::print("maneuvers/run {:.2f}  iterations/maneuver {:.2f}\n", a.maneuvers_per_run, a.mean_iterations);
    }
    if (rep.config.campaign.kind != ExperimentKind::ControlOnly) {
        fmt::print("3-sigma containment {:.4f}  RMS position error {:.3f} km  sigma_vz argmin {} deg\n",
                   a.containment_3sigma, a.rms_position_error_km,
                   std::isnan(a.sigma_vz_argmin_ta_deg) ? std::string("n/a")
                                                        : fmt::format("{:g}", a.sigma_vz_argmin_ta_deg));
    }
    for (const auto& r : rep.runs) {
        if (!r.success) fmt::print("run {} failed: {}\n", r.index, r.failure);
    }
}

int run_campaign(const GlobalFlags& g, const CampaignFlags& f, ExperimentKind kind) {
    ScenarioConfig cfg = load_config(g, kind);
    apply(f, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const MonteCarloReport rep = Campaign(cfg).run();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_report(rep, cfg.campaign.out_dir);
    print_aggregate(rep, secs);
    fmt::print("wrote {}\n", (fs::path(cfg.campaign.out_dir) / "summary.json").string());
    return rep.aggregate.success_rate == 1.0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Horizon-based optical navigation and station keeping on a lunar NRHO"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags g;
    app.add_option("--config", g.config, "JSON scenario file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Root random seed");
    app.add_option("--runs", g.runs, "Monte-Carlo runs (validation: trials)");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--workers", g.workers, "Worker threads");

    auto* val = app.add_subcommand("validate-covariance", "Monte-Carlo check of the OPNAV measurement covariance");
    std::optional<double> range_km;
    std::optional<int> m_points;
    val->add_option("--range-km", range_km, "Camera range [km]");
    val->add_option("--m", m_points, "Limb points per image");

    auto* gen = app.add_subcommand("gen-reference", "Generate and save the reference orbit");
    int gen_revs = 0;
    std::string seed_source = "cr3bp";
    gen->add_option("--revolutions", gen_revs, "Revolutions K (0: campaign length + N + 3)");
    gen->add_option("--seed-source", seed_source, "table1 or cr3bp")
        ->check(CLI::IsMember({"table1", "cr3bp"}));

    CampaignFlags ff, cf, pf;
    auto* rf = app.add_subcommand("run-filter", "Filter-only Monte-Carlo campaign");
    add_campaign_flags(rf, ff, false, true);
    auto* rc = app.add_subcommand("run-control", "Control-only Monte-Carlo campaign");
    add_campaign_flags(rc, cf, true, false);
    auto* rp = app.add_subcommand("run-pipeline", "Navigation and control in closed loop");
    add_campaign_flags(rp, pf, true, true);

    auto* plot = app.add_subcommand("plot-data", "Tidy CSVs from a finished campaign directory");
    std::string from_dir;
    plot->add_option("--from", from_dir, "Campaign output directory")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*val) {
            ScenarioConfig cfg = load_config(g, ExperimentKind::ValidateCovariance);
            if (g.runs) cfg.campaign.validation_trials = *g.runs;
            if (range_km) cfg.campaign.validation_range_km = *range_km;
            if (m_points) cfg.campaign.validation_m = *m_points;
            const ValidationConfig vc = validation_config(cfg);
            const ValidationResult res = validate_covariance_montecarlo(vc);
            write_validation(res, vc, cfg.campaign.out_dir);
            fmt::print("containment within 1/2/3 sigma: {:.4f} {:.4f} {:.4f}  ({} trials, {} skipped)\n",
                       res.fractions[0], res.fractions[1], res.fractions[2], res.used_trials, res.skipped_trials);
            fmt::print("line-of-sight axis: {:.4f} {:.4f} {:.4f}\n", res.range_axis_fractions[0],
                       res.range_axis_fractions[1], res.range_axis_fractions[2]);
            return 0;
        }
        if (*gen) {
            const ScenarioConfig cfg = load_config(g, ExperimentKind::FilterOnly);
            const SeedSource src = seed_source == "table1" ? SeedSource::Table1 : SeedSource::Cr3bp;
            const ReferenceOrbit ref = generate_campaign_reference(cfg, src, gen_revs);
            const fs::path dir = cfg.campaign.out_dir;
            fs::create_directories(dir);
            ref.save(dir / "reference.csv", dir / "reference.json");
            fmt::print("{} perilunes, period {:.1f} s, {} nodes -> {}\n", ref.perilunes().size(), ref.period(),
                       ref.nodes().size(), (dir / "reference.csv").string());
            return 0;
        }
        if (*rf) return run_campaign(g, ff, ExperimentKind::FilterOnly);
        if (*rc) return run_campaign(g, cf, ExperimentKind::ControlOnly);
        if (*rp) return run_campaign(g, pf, ExperimentKind::FullPipeline);
        if (*plot) {
            const fs::path out = g.out ? fs::path(*g.out) : fs::path(from_dir) / "plot";
            write_plot_data(from_dir, out);
            fmt::print("wrote plot data to {}\n", out.string());
            return 0;
        }
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
