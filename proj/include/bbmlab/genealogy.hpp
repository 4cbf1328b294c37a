#pragma once

// Ancestral partitions, particle weights and discrete bridges extracted from
// a checkpointed genealogy.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "bbmlab/engine.hpp"

namespace bbmlab::genealogy {

/// Partition of {0..n-1}; blocks are numbered by their smallest element.
class Partition {
public:
    Partition() = default;
    /// Canonicalises arbitrary block labels.
    template <class Label>
    static Partition from_labels(const std::vector<Label>& labels);
    static Partition singletons(std::size_t n);

    std::size_t size() const { return block_of_.size(); }
    std::size_t block_count() const { return blocks_; }
    std::uint32_t block(std::size_t i) const { return block_of_[i]; }
    const std::vector<std::uint32_t>& block_of() const { return block_of_; }
    std::vector<std::vector<std::uint32_t>> blocks() const;
    std::vector<std::size_t> block_sizes() const;

    /// True when every block of *this lies inside a block of `coarser`.
    bool refines(const Partition& coarser) const;
    /// Partition induced on the listed elements (in the given order).
    Partition restrict_to(const std::vector<std::size_t>& elements) const;

    bool operator==(const Partition& other) const = default;

private:
    std::vector<std::uint32_t> block_of_;
    std::size_t blocks_ = 0;
};

template <class Label>
Partition Partition::from_labels(const std::vector<Label>& labels)
{
    Partition p;
    p.block_of_.resize(labels.size());
    std::map<Label, std::uint32_t> seen;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto next = static_cast<std::uint32_t>(seen.size());
        p.block_of_[i] = seen.emplace(labels[i], next).first->second;
    }
    p.blocks_ = seen.size();
    return p;
}

/// Nondecreasing right-continuous map [0,1] -> [0,1]:
///   B(s) = drift * s + sum of jumps at x_j <= s,
/// stored as jump locations x (strictly increasing) with values value[j] = B(x_j).
/// Pure step functions have drift 0.  When `value_count` is set, value[j] is
/// value_count[j] / value_denominator exactly and inverse lookups compare in
/// exact arithmetic.
struct Bridge {
    std::vector<double> x;
    std::vector<double> value;
    double drift = 0.0;
    std::vector<double> value_count;
    double value_denominator = 0.0;
    /// Mass of untracked small jumps, carried by the drift part (approximate
    /// bridges only).
    double residual = 0.0;

    static Bridge identity();
    double operator()(double s) const;
    /// B^{-1}(u) = inf{s : B(s) >= u}.
    double inverse(double u) const;
    /// Jump sizes in breakpoint order.
    std::vector<double> jumps() const;
    /// Throws std::logic_error when the type invariants fail.
    void check() const;
};

/// B^{-1}(u); free-function spelling.
double bridge_inverse(const Bridge& b, double u);

/// i ~ j iff B^{-1}(U_i) = B^{-1}(U_j).  Inverse values are stored
/// breakpoint coordinates or points of the linear part, so equality is exact.
Partition partition_from_bridge(const Bridge& b, const std::vector<double>& uniforms);

/// Cumulative weights of one generation in label order: c[0] = 0 and
/// c[I] = (sum of the first I weights) / (total), so c[M] = 1 exactly.
struct Cumulative {
    std::vector<double> c;
    bool terminal = false;
    bool strictly_increasing = true;
};

/// Weights w(i, j): e^{mu x} sin(pi x / L) 1{x <= L} / Z, or 1/M at the
/// terminal generation.  Throws std::domain_error when Z or M is zero.
std::vector<double> assign_weights(const engine::GenealogyLog& log, std::size_t j, bool terminal);
Cumulative cumulative_weights(const engine::GenealogyLog& log, std::size_t j, bool terminal);

/// max{I : w_1 + ... + w_I <= y}, 0 for the empty set.
std::size_t quantile_index(double y, const std::vector<double>& weights);

/// D[I] = number of generation-k particles descending from the first I
/// particles of generation j (I = 0..M_j).
std::vector<std::size_t> descendant_prefix(const engine::GenealogyLog& log, std::size_t j, std::size_t k);

/// Ancestor index in generation j of every particle of generation k.
std::vector<std::uint32_t> ancestors(const engine::GenealogyLog& log, std::size_t j, std::size_t k);

/// B^N_{t_j, t_k}.  Generation k uses terminal weights when it is the last
/// generation of the log.
Bridge discrete_bridge(const engine::GenealogyLog& log, std::size_t j, std::size_t k);

/// Partition of the sampled particles (ids at time T) by common ancestor at
/// time T - s_back.  Throws std::invalid_argument for unknown times or ids.
Partition ancestral_partition(const engine::GenealogyLog& log, double T, const std::vector<std::uint64_t>& sample_ids,
                              double s_back);
/// Same with sample given as indices into the generation at time T.
Partition ancestral_partition_by_index(const engine::GenealogyLog& log, std::size_t k,
                                       const std::vector<std::size_t>& sample, std::size_t j);

/// Index ceil(u * M) - 1 (0-based) computed exactly, for u in (0, 1].
std::size_t terminal_sample_index(double u, std::size_t M);

std::string partition_to_json(const Partition& p);
void write_bridge_csv(std::ostream& out, const Bridge& b);

} // namespace bbmlab::genealogy
