#pragma once

// Desk-scale probes of the large-N limits: pair coalescence times across
// population sizes, the population-size / Z link, and the shape of sampled
// genealogies against Kingman and Bolthausen-Sznitman.
//
// Every run starts N particles in the stable profile, kills only at 0, and
// records the genealogy at checkpoints spaced (log N)^3 / resolution apart.
// Run r uses seed derive_stream(seed, r); population size N in a scaling
// experiment uses derive_stream(seed, N), so repeated sizes repeat exactly.

#include <cstdint>
#include <vector>

#include "bbmlab/engine.hpp"

namespace bbmlab::experiments {

struct LineageOptions {
    double sample_time = 0.25;    ///< sampling time in units of (log N)^3
    double resolution = 400.0;    ///< checkpoints per (log N)^3
    std::int64_t pairs_per_run = 10;
    std::int64_t max_particles_factor = 50;  ///< abort above this many times N
    unsigned threads = 1;
};

struct PairCoalescence {
    std::int64_t N = 0;
    double log_cubed = 0.0;             ///< (log N)^3
    double sample_time = 0.0;           ///< absolute time T of the sample
    std::int64_t runs = 0;
    std::int64_t extinct_runs = 0;      ///< fewer than two particles at T
    std::int64_t aborted_runs = 0;
    std::int64_t pairs = 0;
    std::int64_t censored = 0;          ///< lineages still distinct at time 0
    std::vector<double> times;          ///< uncensored pair coalescence times
    double median = 0.0;                ///< censored pairs count as +inf; NaN if undefined
    double censored_fraction() const { return pairs ? double(censored) / double(pairs) : 0.0; }
};

struct MrcaReport {
    std::vector<PairCoalescence> per_N;
    double ratio = 0.0;      ///< median(last) / median(first)
    double predicted = 0.0;  ///< (log N_last / log N_first)^3
};

/// Pair coalescence times sampled at T = sample_time (log N)^3.
PairCoalescence pair_coalescence(std::int64_t N, std::int64_t runs, std::uint64_t seed, const LineageOptions& opt);

MrcaReport mrca_scaling_experiment(const std::vector<std::int64_t>& N_list, std::int64_t runs, std::uint64_t seed,
                                   const LineageOptions& opt = {});

struct PopulationLink {
    std::int64_t N = 0;
    double burn_in = 0.0;
    std::int64_t runs = 0;
    std::int64_t empty_runs = 0;
    std::vector<double> ratios;  ///< M (log N)^2 / (2 pi Z) per surviving run
    double median = 0.0;
};

/// M (log N)^2 / (2 pi Z) at time burn_in_factor (log N)^2.
PopulationLink population_link(std::int64_t N, std::int64_t runs, std::uint64_t seed, double burn_in_factor = 2.0,
                               unsigned threads = 1);

struct SampledGenealogy {
    std::int64_t N = 0;
    std::size_t n = 0;
    double clock_rate = 0.0;      ///< coalescent time s = clock_rate * (T - t) / (log N)^3
    std::vector<double> s_grid;
    std::vector<double> mean_blocks;  ///< empirical mean block count on s_grid
    std::int64_t runs_used = 0;
    std::int64_t merger_events = 0;   ///< checkpoint intervals with a merger
    std::int64_t multiple_events = 0; ///< ... where some block absorbs >= 3 lineages
    double multiple_fraction() const { return merger_events ? double(multiple_events) / double(merger_events) : 0.0; }
};

/// Samples n distinct particles at T = sample_time (log N)^3 in each
/// surviving run and records the block counts of their ancestral
/// partition as a function of the coalescent clock.
SampledGenealogy sampled_genealogy(std::int64_t N, std::size_t n, std::int64_t runs, std::uint64_t seed,
                                   double clock_rate, const std::vector<double>& s_grid, const LineageOptions& opt);

/// Clock rate that maps the median pair coalescence time to the median
/// Exp(1) waiting time ln 2 of both coalescents.
double calibrate_clock(const PairCoalescence& pc);

} // namespace bbmlab::experiments
