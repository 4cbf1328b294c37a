#pragma once

// Binary branching Brownian motion with drift -mu, absorbed at 0 and
// optionally killed (or recorded) at a right barrier.
//
// Branch times are exact exponential clocks.  Between events a particle
// receives one Gaussian increment per substep and the barrier crossing
// inside the substep is decided from the exact Brownian-bridge survival
// probability, so no time step introduces bias.
//
// Between checkpoints every particle alive at the previous checkpoint is
// the root of an independent subtree, simulated depth first on its own
// random stream.  Results are therefore identical for any thread count.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bbmlab/analytics.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab::engine {

enum class BarrierMode { None, KillAt, RecordHits };

struct InitialCondition {
    enum class Kind { StableProfile, PointMass, Explicit };
    Kind kind = Kind::PointMass;
    std::int64_t count = 1;       ///< StableProfile and PointMass
    double x = 1.0;               ///< PointMass position
    std::vector<double> positions;  ///< Explicit

    static InitialCondition stable_profile(std::int64_t count);
    static InitialCondition point_mass(double x, std::int64_t count = 1);
    static InitialCondition explicit_positions(std::vector<double> xs);
};

struct SimConfig {
    /// mu drives the particles, L is the level of the Z statistic and L_A the
    /// right barrier (when one is active).
    analytics::ModelParams params;
    double dt_max = 1.0;
    double horizon = 1.0;
    /// Observation times in [0, horizon]; 0 and the horizon are added if absent.
    std::vector<double> checkpoint_times;
    BarrierMode right_barrier = BarrierMode::None;
    InitialCondition init;
    std::uint64_t seed = 1;
    std::int64_t max_particles = 10'000'000;
    unsigned threads = 1;
    /// Keep the full per-checkpoint genealogy (positions, parents, ids).
    bool record_genealogy = true;
};

/// Model parameters for a strip experiment with arbitrary drift and levels.
analytics::ModelParams custom_params(double mu, double L, double L_A);

/// Throws std::invalid_argument describing the first violated invariant.
void validate(const SimConfig& cfg);

/// Living particles at one instant, structure of arrays.
struct ParticleSystem {
    double time = 0.0;
    std::vector<double> x;
    std::vector<double> next_branch;       ///< absolute time of the next split
    std::vector<std::uint64_t> stream;     ///< random stream id, also the particle id
    std::vector<std::uint64_t> counter;    ///< words consumed from the stream
    std::vector<std::uint8_t> hit;         ///< lineage already reached the right level
    std::vector<std::uint32_t> parent;     ///< index at the previous checkpoint

    std::size_t size() const { return x.size(); }
};

struct Statistics {
    double Z = 0.0;
    double Y = 0.0;
    std::int64_t M = 0;
};

/// Z = sum e^{mu x} sin(pi x/L) 1{x <= L}, Y = sum e^{mu x}, M = count,
/// summed in index order.
Statistics statistics(const std::vector<double>& x, const analytics::ModelParams& params);

/// Draws from the density proportional to e^{-mu y} sin(pi y/L) on (0, L)
/// by inverting the closed-form CDF.  Draw i is the first uniform of the
/// stream run() gives initial particle i, so the two agree.
std::vector<double> sample_stable_profile(std::int64_t count, const analytics::ModelParams& params,
                                          std::uint64_t seed);

struct Barrier {
    BarrierMode mode = BarrierMode::None;
    double level = 0.0;
};

struct SegmentOutcome {
    double x = 0.0;
    bool killed = false;
    bool killed_upper = false;  ///< the kill happened at the right barrier
    bool hit_upper = false;     ///< RecordHits: the path reached the level
};

/// Moves one particle from x0 over time h with drift -mu and decides the
/// barrier events inside the substep exactly.  `already_hit` suppresses
/// hit detection for lineages that have reached the level before.
SegmentOutcome advance_segment(double x0, double h, double mu, const Barrier& barrier, bool already_hit,
                               rng::Stream& stream);

struct EventCounts {
    std::int64_t births = 0;
    std::int64_t deaths_lower = 0;
    std::int64_t deaths_upper = 0;
    std::int64_t hits = 0;
};

struct StepResult {
    ParticleSystem system;           ///< survivors grouped by parent index
    EventCounts events;
    std::vector<double> hit_times;   ///< sorted; substep end times
    std::optional<double> last_death;
    bool aborted = false;
};

/// Advances every particle of `sys` by dt.  Survivors keep their parent's
/// index in `parent`; within one parent they appear in depth-first order.
StepResult step_population(const ParticleSystem& sys, double dt, const SimConfig& cfg);

struct Generation {
    double time = 0.0;
    std::vector<double> x;
    std::vector<std::uint32_t> parent;  ///< index into the previous generation
    std::vector<std::uint64_t> id;
};

/// Checkpointed ancestry.  Each generation is stored in lexicographic label
/// order: children follow their parent's order, and siblings are ordered by
/// an independent uniform key.
struct GenealogyLog {
    double mu = 0.0;
    double z_level = 0.0;
    std::vector<Generation> generations;

    /// Index of the generation at time t (exact match), or nullopt.
    std::optional<std::size_t> find(double t) const;
};

struct TrajectoryRow {
    double t = 0.0;
    double Z = 0.0;
    double Y = 0.0;
    std::int64_t M = 0;
    std::int64_t R = 0;
};

struct HitLog {
    std::vector<double> hit_times;
    std::vector<std::int64_t> counts;  ///< R_k per checkpoint interval (R_0 = 0)
};

struct RunResult {
    std::vector<TrajectoryRow> trajectory;
    GenealogyLog genealogy;
    HitLog hits;
    EventCounts events;
    bool aborted = false;
    std::optional<double> extinction_time;
    /// Y(0) / (N (log N)^3), the initial-condition diagnostic.
    double initial_y_diagnostic = 0.0;
    ParticleSystem final_state;
};

/// Full run.  After extinction the remaining checkpoints are reported with
/// zero population; after an abort the trajectory stops at the last
/// completed checkpoint.
RunResult run(const SimConfig& cfg);

/// Sorted checkpoint list actually used by run().
std::vector<double> effective_checkpoints(const SimConfig& cfg);

/// Unbiased estimate of the expected time driftless Brownian motion from x0
/// spends in [a, b] before leaving (0, K): occupation is probed at the
/// points of an independent Poisson process of rate `probe_rate`.
struct OccupationEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::int64_t paths = 0;
};
OccupationEstimate occupation_time_estimate(double x0, double K, double a, double b, std::int64_t paths,
                                            std::uint64_t seed, double probe_rate = 8.0);

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);
std::string genealogy_to_json(const GenealogyLog& log);
GenealogyLog genealogy_from_json(const std::string& text);

} // namespace bbmlab::engine
