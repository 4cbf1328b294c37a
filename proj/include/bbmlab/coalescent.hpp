#pragma once

// Exact Gillespie samplers for the Kingman and Bolthausen-Sznitman
// coalescents on n labels.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bbmlab/genealogy.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab::coalescent {

enum class Kind { Kingman, BolthausenSznitman };

Kind parse_kind(const std::string& name);
std::string kind_name(Kind kind);

/// Aggregate rates C(b,k) lambda_{b,k} for k = 2..b (index k-2).
std::vector<double> merger_rates(int b, Kind kind);

struct MergeEvent {
    double time = 0.0;
    /// Indices of the merged blocks in the canonical block order just
    /// before the event, increasing.
    std::vector<std::uint32_t> blocks;
    std::size_t k() const { return blocks.size(); }
};

struct CoalescentPath {
    std::size_t n = 0;
    double horizon = 0.0;
    std::vector<MergeEvent> events;

    /// Partition at time s (events with time <= s applied).
    genealogy::Partition at(double s) const;
    std::size_t block_count(double s) const;
};

/// Events up to `horizon` (which may be infinite).
CoalescentPath sample_path(std::size_t n, double horizon, Kind kind, rng::Stream& stream);

/// Block-count distributions and the pair (labels 0 and 1) coalescence
/// frequency at each observation time, over independent replicates.
struct Marginals {
    std::vector<double> times;
    std::vector<std::vector<std::int64_t>> block_counts;  ///< [time][b], b = 0..n
    std::vector<double> pair_coalesced;                   ///< fraction per time
    std::vector<double> pair_se;
    std::int64_t replicates = 0;
};

Marginals finite_dim_marginal(std::size_t n, const std::vector<double>& times, Kind kind, std::int64_t replicates,
                              std::uint64_t seed, unsigned threads = 1);

/// Header `time,k,block_ids`; each row lists the merged block ids after k.
void write_events_csv(std::ostream& out, const CoalescentPath& path);

} // namespace bbmlab::coalescent
