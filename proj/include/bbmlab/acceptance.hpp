#pragma once

// Acceptance criteria.  Criteria 1-8 are exact or analytic gates [hard];
// 9-13 probe large-N limits at desk scale [soft] and only warn.
//
// Criterion i draws its randomness from derive_stream(seed, i), so a suite
// run is reproducible from (seed, threads-independent options).

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "bbmlab/stats.hpp"

namespace bbmlab::acceptance {

struct Options {
    std::uint64_t seed = 20240601;
    unsigned threads = 1;
    /// Multiplies the replicate counts of the statistical criteria.
    double effort = 1.0;
};

/// Canonical key = value text of the options, the input of the config hash.
std::string canonical_options(const Options& opt);
std::string options_hash(const Options& opt);

struct CriterionResult {
    int id = 0;
    stats::Gate gate = stats::Gate::Hard;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    std::map<std::string, double> values;  ///< oracles and observations
};

/// Criterion ids of a suite: identities, engine, coalescent, csbp,
/// genealogy, fkpp, scaling, hard, soft, all, or a single number 1-13.
/// Throws std::invalid_argument for an unknown suite.
std::vector<int> suite_ids(const std::string& suite);

struct SuiteOutcome {
    std::vector<CriterionResult> results;
    bool hard_failure = false;
    bool soft_failure = false;
    std::string config_hash;
};

/// Runs the criteria in id order, printing one line per criterion to `out`
/// as it completes.
SuiteOutcome run_suite(const std::vector<int>& ids, const Options& opt, std::ostream& out);

std::string format_line(const CriterionResult& r);
std::string outcome_to_json(const SuiteOutcome& outcome, const Options& opt);

} // namespace bbmlab::acceptance
