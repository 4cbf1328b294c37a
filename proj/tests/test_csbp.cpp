#include <doctest.h>

#include "bbmlab/analytics.hpp"
#include "bbmlab/coalescent.hpp"
#include "bbmlab/csbp.hpp"
#include "bbmlab/stats.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

using namespace bbmlab;
using namespace bbmlab::csbp;
using analytics::CsbpParams;

namespace {

constexpr double kPi = std::numbers::pi;

// Mean of e^{-lambda X} with its standard error.
stats::MeanSe laplace_mc(const std::vector<double>& xs, double lambda)
{
    std::vector<double> v;
    v.reserve(xs.size());
    for (double x : xs) v.push_back(std::exp(-lambda * x));
    return stats::mean_se(v);
}

} // namespace

TEST_CASE("positive stable draws")
{
    SUBCASE("alpha near one concentrates at one")
    {
        rng::Stream s(1, 1);
        double sum = 0.0;
        for (int i = 0; i < 100000; ++i) sum += std::min(sample_positive_stable(0.999, s), 10.0);
        const double mean = sum / 100000;
        CHECK(mean > 0.9);
        CHECK(mean < 1.1);
    }
    SUBCASE("alpha one half is the Levy law")
    {
        rng::Stream s(2, 1);
        std::vector<double> xs;
        for (int i = 0; i < 100000; ++i) xs.push_back(sample_positive_stable(0.5, s));
        const auto r = stats::ks_test(xs, [](double x) { return x <= 0 ? 0.0 : std::erfc(1.0 / (2.0 * std::sqrt(x))); });
        CHECK(r.passed);
    }
    SUBCASE("Laplace transform")
    {
        rng::Stream s(3, 1);
        std::vector<double> xs;
        for (int i = 0; i < 100000; ++i) xs.push_back(sample_positive_stable(0.7, s));
        for (double lambda : {0.5, 1.0, 2.0}) {
            const auto m = laplace_mc(xs, lambda);
            CHECK(std::abs(m.mean - std::exp(-std::pow(lambda, 0.7))) < 4 * m.se);
        }
    }
    rng::Stream s(4, 1);
    CHECK_THROWS_AS(sample_positive_stable(1.0, s), std::invalid_argument);
    CHECK_THROWS_AS(sample_positive_stable(0.0, s), std::invalid_argument);
    CHECK(log_positive_stable(1.0, s) == 0.0);
}

TEST_CASE("subordinator increments")
{
    const CsbpParams p{0.3, 1.2};
    rng::Stream s(5, 5);
    CHECK(sample_S_increment(0.0, 2.5, p, s) == 2.5);
    CHECK(sample_S_increment(0.7, 0.0, p, s) == 0.0);
    CHECK_THROWS_AS(sample_S_increment(-1.0, 1.0, p, s), std::invalid_argument);
    CHECK_THROWS_AS(sample_S_increment(1.0, 1.0, CsbpParams{0.0, 0.0}, s), std::invalid_argument);

    for (double dt : {0.1, 0.5}) {
        for (double x : {0.5, 2.0}) {
            std::vector<double> draws;
            rng::Stream st(6, rng::root_stream(std::uint64_t(dt * 100 + x * 10)));
            for (int i = 0; i < 100000; ++i) draws.push_back(sample_S_increment(dt, x, p, st));
            for (double lambda : {0.5, 1.0, 3.0}) {
                const auto m = laplace_mc(draws, lambda);
                const double exact = std::exp(-x * analytics::csbp_laplace_u(dt, lambda, p));
                CHECK(std::abs(m.mean - exact) < 4 * m.se);
            }
        }
    }
}

TEST_CASE("additivity in the initial mass")
{
    const CsbpParams p{0.0, 1.0};
    rng::Stream s1(7, 1);
    rng::Stream s2(7, 2);
    std::vector<double> sum;
    std::vector<double> direct;
    for (int i = 0; i < 100000; ++i) {
        sum.push_back(sample_S_increment(0.4, 0.7, p, s1) + sample_S_increment(0.4, 1.3, p, s1));
        direct.push_back(sample_S_increment(0.4, 2.0, p, s2));
    }
    CHECK(stats::ks_two_sample(sum, direct).passed);
}

TEST_CASE("flow composition")
{
    const CsbpParams p{0.5, 2.0};
    rng::Stream s1(8, 1);
    rng::Stream s2(8, 2);
    std::vector<double> composed;
    std::vector<double> direct;
    for (int i = 0; i < 100000; ++i) {
        const double mid = log_S_increment(0.15, 0.0, p, s1);
        composed.push_back(log_S_increment(0.25, mid, p, s1));
        direct.push_back(log_S_increment(0.4, 0.0, p, s2));
    }
    CHECK(stats::ks_two_sample(composed, direct).passed);
}

TEST_CASE("trajectories")
{
    const CsbpParams p{0.0, 2 * kPi * kPi};
    rng::Stream s(9, 9);
    const auto zero = csbp_trajectory(0.0, {0.1, 0.5}, p, s);
    for (double lz : zero.log_Z) CHECK(lz == -std::numeric_limits<double>::infinity());

    std::vector<double> times;
    for (int k = 1; k <= 10; ++k) times.push_back(0.1 * k);
    int bad = 0;
    for (int i = 0; i < 100000; ++i) {
        rng::Stream st(10, rng::root_stream(i));
        const auto tr = csbp_trajectory(1.0, times, p, st);
        for (double lz : tr.log_Z)
            if (!std::isfinite(lz)) ++bad;
    }
    CHECK(bad == 0);

    // One-step marginal against the Laplace functional.
    const CsbpParams q{0.2, 0.8};
    std::vector<double> z;
    for (int i = 0; i < 100000; ++i) {
        rng::Stream st(11, rng::root_stream(i));
        z.push_back(std::exp(csbp_trajectory(1.5, {0.6}, q, st).log_Z[0]));
    }
    for (double lambda : {0.3, 1.0, 2.5}) {
        const auto m = laplace_mc(z, lambda);
        CHECK(std::abs(m.mean - std::exp(-1.5 * analytics::csbp_laplace_u(0.6, lambda, q))) < 4 * m.se);
    }

    Trajectory big;
    big.times = {0.0, 1.0, 2.0};
    big.log_Z = {0.0, 2000.0 * std::numbers::ln10, -std::numeric_limits<double>::infinity()};
    std::ostringstream out;
    write_trajectory_csv(out, big);
    CHECK(out.str() == "t,Z\n0,1\n1,1.0000000000e+2000\n2,0\n");
}

TEST_CASE("stable bridges")
{
    rng::Stream s(12, 12);
    const auto fb = stable_bridge(0.5, 4096, s);
    fb.bridge.check();
    double sum = 0.0;
    for (double g : fb.gaps) sum += g;
    CHECK(sum + fb.residual == 1.0);
    CHECK(std::is_sorted(fb.gaps.rbegin(), fb.gaps.rend()));
    CHECK(fb.residual < 1e-3);

    const CsbpParams p{0.0, 1.0};
    const auto id = bridge_from_flow(0.3, 0.3, 1.0, p, s);
    CHECK(id.bridge.drift == 1.0);
    CHECK(id.bridge.x.empty());
    CHECK(id.log_mass_t == id.log_mass_s);

    const auto small = bridge_from_flow(0.0, 0.01, 1.0, p, s, 16, 0.9);
    CHECK_FALSE(small.coverage_ok);
    small.bridge.check();

    std::ostringstream out;
    genealogy::write_bridge_csv(out, small.bridge);
    CHECK(out.str().rfind("# drift=", 0) == 0);
}

TEST_CASE("largest gap follows Poisson-Dirichlet")
{
    std::vector<double> flow;
    std::vector<double> oracle;
    rng::Stream a(13, 1);
    rng::Stream b(13, 2);
    for (int i = 0; i < 10000; ++i) {
        flow.push_back(stable_bridge(0.5, 4096, a).gaps[0]);
        oracle.push_back(pd_largest(0.5, b));
    }
    CHECK(stats::ks_two_sample(flow, oracle).passed);

    // Stick breaking pieces sum to one up to the requested tail.
    rng::Stream c(14, 1);
    const auto pieces = pd_stick_breaking(0.3, c, 1e-6);
    double total = 0.0;
    for (double v : pieces) total += v;
    CHECK(total > 1 - 1e-6);
    CHECK(total <= 1 + 1e-12);
}

TEST_CASE("bridge gaps are independent of the earlier mass")
{
    const CsbpParams p{0.0, 1.0};
    rng::Stream s(15, 15);
    std::vector<double> mass;
    std::vector<double> gap;
    const int R = 4000;
    for (int i = 0; i < R; ++i) {
        const auto fb = bridge_from_flow(0.5, 1.2, 1.0, p, s, 256);
        mass.push_back(fb.log_mass_s);
        gap.push_back(fb.gaps[0]);
    }
    const auto mm = stats::mean_se(mass);
    const auto mg = stats::mean_se(gap);
    double cov = 0.0;
    double vm = 0.0;
    double vg = 0.0;
    for (int i = 0; i < R; ++i) {
        cov += (mass[i] - mm.mean) * (gap[i] - mg.mean);
        vm += (mass[i] - mm.mean) * (mass[i] - mm.mean);
        vg += (gap[i] - mg.mean) * (gap[i] - mg.mean);
    }
    const double corr = cov / std::sqrt(vm * vg);
    CHECK(std::abs(corr) < 3.0 / std::sqrt(double(R)));
}

TEST_CASE("total mass from a bridge matches the one-step law")
{
    const CsbpParams p{0.4, 1.5};
    rng::Stream s(16, 16);
    std::vector<double> z;
    for (int i = 0; i < 20000; ++i) z.push_back(std::exp(bridge_from_flow(0.2, 0.7, 1.3, p, s, 512).log_mass_t));
    for (double lambda : {0.5, 2.0}) {
        const auto m = laplace_mc(z, lambda);
        CHECK(std::abs(m.mean - std::exp(-1.3 * analytics::csbp_laplace_u(0.7, lambda, p))) < 4 * m.se + 1e-3);
    }
}

TEST_CASE("partitions from the flow match the direct BSZ sampler")
{
    const CsbpParams p{0.0, 2 * kPi * kPi};
    const double clock = p.b;  // Neveu flow: coalescent time equals b times CSBP time
    const std::vector<double> times{0.0, 0.4, 1.0};
    const int R = 4000;
    const std::size_t n = 6;
    std::vector<double> pair(times.size(), 0.0);
    std::vector<double> counts(n + 1, 0.0);
    for (int i = 0; i < R; ++i) {
        rng::Stream st(17, rng::root_stream(i));
        const auto fp = bsz_partitions_from_flow(1.0, n, times, p, clock, st, 1024);
        CHECK(fp.partitions[0] == genealogy::Partition::singletons(n));
        for (std::size_t k = 0; k < times.size(); ++k) pair[k] += fp.partitions[k].block(0) == fp.partitions[k].block(1);
        counts[fp.partitions[1].block_count()] += 1;
        for (std::size_t k = 1; k < times.size(); ++k) CHECK(fp.partitions[k - 1].refines(fp.partitions[k]));
    }
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double ph = pair[k] / R;
        const double se = std::sqrt(ph * (1 - ph) / R);
        CHECK(std::abs(ph - (1 - std::exp(-times[k]))) < 3 * se);
    }
    const auto direct = coalescent::finite_dim_marginal(n, {times[1]}, coalescent::Kind::BolthausenSznitman, 200000, 3);
    std::vector<double> obs;
    std::vector<double> exp;
    double po = 0.0;
    double pe = 0.0;
    for (std::size_t b = 1; b <= n; ++b) {
        const double e = double(direct.block_counts[0][b]) / 200000.0 * R;
        if (e < 5) {
            po += counts[b];
            pe += e;
            continue;
        }
        obs.push_back(counts[b]);
        exp.push_back(e);
    }
    if (pe > 0) {
        obs.push_back(po);
        exp.push_back(pe);
    }
    CHECK(stats::chi_square(obs, exp).passed);

    rng::Stream st(18, 1);
    CHECK_THROWS_AS(bsz_partitions_from_flow(1.0, 4, {0.5, 0.2}, p, clock, st), std::invalid_argument);
    CHECK_THROWS_AS(bsz_partitions_from_flow(0.01, 4, {0.5}, p, clock, st), std::invalid_argument);
}
