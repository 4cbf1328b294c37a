#include <doctest.h>

#include "bbmlab/experiments.hpp"

#include <cmath>
#include <numbers>

using namespace bbmlab;
using namespace bbmlab::experiments;

namespace {

LineageOptions quick()
{
    LineageOptions lo;
    lo.sample_time = 0.1;
    lo.resolution = 200.0;
    return lo;
}

} // namespace

TEST_CASE("identical population sizes give ratio one")
{
    const auto rep = mrca_scaling_experiment({300, 300}, 6, 5, quick());
    REQUIRE(rep.per_N.size() == 2);
    CHECK(rep.predicted == 1.0);
    CHECK(rep.per_N[0].median == rep.per_N[1].median);
    CHECK(rep.ratio == 1.0);
    CHECK_THROWS_AS(mrca_scaling_experiment({1000, 300}, 2, 1, quick()), std::invalid_argument);
    CHECK_THROWS_AS(mrca_scaling_experiment({}, 2, 1, quick()), std::invalid_argument);
}

TEST_CASE("pair coalescence bookkeeping")
{
    const auto pc = pair_coalescence(300, 8, 2, quick());
    CHECK(pc.runs == 8);
    CHECK(pc.log_cubed == doctest::Approx(std::pow(std::log(300.0), 3)));
    CHECK(pc.sample_time == doctest::Approx(0.1 * pc.log_cubed));
    CHECK(pc.pairs == (pc.runs - pc.extinct_runs - pc.aborted_runs) * 10);
    CHECK(pc.pairs == std::int64_t(pc.times.size()) + pc.censored);
    for (double t : pc.times) {
        CHECK(t > 0.0);
        CHECK(t <= pc.sample_time + 1e-9);
    }
    // Thread count does not change the result.
    auto lo = quick();
    lo.threads = 3;
    const auto par = pair_coalescence(300, 8, 2, lo);
    CHECK(par.times == pc.times);
    CHECK(par.censored == pc.censored);
    CHECK_THROWS_AS(pair_coalescence(300, 0, 2, quick()), std::invalid_argument);
}

TEST_CASE("clock calibration")
{
    PairCoalescence pc;
    pc.log_cubed = 100.0;
    pc.median = 50.0;
    CHECK(calibrate_clock(pc) == doctest::Approx(2.0 * std::numbers::ln2));
    pc.median = std::nan("");
    CHECK_THROWS_AS(calibrate_clock(pc), std::domain_error);
}

TEST_CASE("sampled genealogy block counts")
{
    const double clock = 5.0;
    const std::vector<double> grid{0.0, 0.1, 0.3, 0.45};
    const auto g = sampled_genealogy(300, 6, 6, 3, clock, grid, quick());
    REQUIRE(g.runs_used > 0);
    CHECK(g.mean_blocks[0] == 6.0);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        CHECK(g.mean_blocks[i] <= g.mean_blocks[i - 1]);
        CHECK(g.mean_blocks[i] >= 1.0);
    }
    CHECK(g.multiple_events <= g.merger_events);
    CHECK_THROWS_AS(sampled_genealogy(300, 6, 2, 3, clock, {0.6}, quick()), std::invalid_argument);
    CHECK_THROWS_AS(sampled_genealogy(300, 1, 2, 3, clock, grid, quick()), std::invalid_argument);
}

TEST_CASE("population link ratios")
{
    const auto link = population_link(300, 4, 9, 0.5);
    CHECK(link.runs == 4);
    CHECK(link.burn_in == doctest::Approx(0.5 * std::pow(std::log(300.0), 2)));
    CHECK(std::int64_t(link.ratios.size()) + link.empty_runs == 4);
    for (double r : link.ratios) CHECK(r > 0.0);
    CHECK_THROWS_AS(population_link(300, 0, 9), std::invalid_argument);
}
