#pragma once

#include "nrhonav/core/state.hpp"
#include "nrhonav/dynamics/propagator.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nrhonav {

/// Downstream perilune to be targeted by the station-keeping controller.
struct TargetSpec {
    Epoch epoch;            ///< reference perilune epoch
    double vx_em = 0.0;     ///< reference EM-frame x velocity there [km/s]
    int index = 0;          ///< perilune index within the reference
};

struct ReferenceEvent {
    Epoch epoch;
    StateVector state;
    double vx_em = 0.0;
};

class ReferenceOrbit {
public:
    ReferenceOrbit() = default;
    ReferenceOrbit(std::vector<TrajectoryNode> nodes, std::vector<ReferenceEvent> perilunes,
                   std::vector<ReferenceEvent> apolunes, double period_s, std::string descriptor);

    [[nodiscard]] const std::vector<TrajectoryNode>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<ReferenceEvent>& perilunes() const { return perilunes_; }
    [[nodiscard]] const std::vector<ReferenceEvent>& apolunes() const { return apolunes_; }
    [[nodiscard]] double period() const { return period_; }
    [[nodiscard]] const std::string& descriptor() const { return descriptor_; }
    [[nodiscard]] std::uint64_t model_hash() const;

    [[nodiscard]] Epoch t_begin() const { return nodes_.front().epoch; }
    [[nodiscard]] Epoch t_end() const { return nodes_.back().epoch; }

    /// Quintic Hermite interpolation (position, velocity, acceleration at both nodes).
    [[nodiscard]] StateVector lookup_state(Epoch t) const;

    /// N-th perilune strictly after `t`.
    [[nodiscard]] TargetSpec nth_perilune_after(Epoch t, int n) const;

    void save(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) const;
    static ReferenceOrbit load(const std::filesystem::path& csv_path, const std::filesystem::path& json_path);

private:
    std::vector<TrajectoryNode> nodes_;
    std::vector<ReferenceEvent> perilunes_;
    std::vector<ReferenceEvent> apolunes_;
    double period_ = 0.0;
    std::string descriptor_;
};

struct ReferenceGenConfig {
    int revolutions = 70;
    double node_max_step_s = 1800.0;
    double defect_tol = 1e-10;       ///< canonical units
    int max_iterations = 25;
};

enum class SeedSource { Table1, Cr3bp };

/// Apolune guess in the EM frame: x0, z0 [km] and vy0 [km/s] (vx = vz = y = 0).
struct SymmetricSeed {
    double x0 = 0.0;
    double z0 = 0.0;
    double vy0 = 0.0;
};

/// Baseline state adapted to the analytic EM geometry: the distance from the
/// Moon's polar axis, the z offset and the inertial speed are preserved.
SymmetricSeed table1_seed(const DynamicsModel& model);

/// Nine-to-two-like southern L2 halo guess from the restricted three-body problem.
SymmetricSeed cr3bp_seed(const DynamicsModel& model);

/// Symmetric periodic orbit found by single shooting (z0 fixed).
struct PeriodicSolution {
    SymmetricSeed seed;
    double period_s = 0.0;
    int iterations = 0;
};

PeriodicSolution correct_symmetric_orbit(const Propagator& prop, Epoch t0, SymmetricSeed guess,
                                         int max_iterations = 25);

/// Builds the reference: single shooting, K-revolution multiple shooting with
/// apolune patch points, dense re-propagation and event tagging.
///
/// When `symmetric` is given, the periodic orbit is found in that (autonomous)
/// model and its apolune state, placed in the EM frame of `prop` at every
/// patch epoch, seeds a continuity-only multiple shooting in `prop`. The
/// result is then a quasi-periodic orbit of the non-autonomous model.
ReferenceOrbit generate_reference(const Propagator& prop, Epoch t0, SymmetricSeed seed,
                                  const ReferenceGenConfig& cfg, const Propagator* symmetric = nullptr);

/// Tries `preferred` first and falls back to the restricted three-body seed when
/// single shooting fails from it. `used` receives the seed that succeeded.
ReferenceOrbit build_baseline_reference(const Propagator& prop, Epoch t0, const ReferenceGenConfig& cfg,
                                        SeedSource preferred = SeedSource::Table1, SeedSource* used = nullptr,
                                        const Propagator* symmetric = nullptr);

/// 64-bit FNV-1a digest, used to fingerprint model descriptors.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace nrhonav
