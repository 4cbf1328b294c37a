#include <doctest.h>

#include "bbmlab/analytics.hpp"
#include "bbmlab/engine.hpp"
#include "bbmlab/quadrature.hpp"
#include "bbmlab/stats.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace bbmlab;
using namespace bbmlab::engine;

namespace {

constexpr double kPi = std::numbers::pi;

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// First-passage probability to 0 by time t for BM with drift -mu from x.
double absorbed_by(double x, double mu, double t)
{
    return normal_cdf((-x + mu * t) / std::sqrt(t)) + std::exp(2 * mu * x) * normal_cdf((-x - mu * t) / std::sqrt(t));
}

struct Proportion {
    double p;
    double se;
};

Proportion absorption_estimate(double x0, double mu, double t, double dt_max, int paths, std::uint64_t seed)
{
    int absorbed = 0;
    const Barrier none{BarrierMode::None, 0.0};
    for (int i = 0; i < paths; ++i) {
        rng::Stream s(seed, rng::root_stream(i));
        double x = x0;
        double time = 0.0;
        while (time < t) {
            const double h = std::min(dt_max, t - time);
            const auto seg = advance_segment(x, h, mu, none, false, s);
            time += h;
            if (seg.killed) {
                ++absorbed;
                break;
            }
            x = seg.x;
        }
    }
    const double p = double(absorbed) / paths;
    return {p, std::sqrt(p * (1 - p) / paths)};
}

SimConfig strip_config(double K, double mu, double x0, double t, std::uint64_t seed)
{
    SimConfig cfg;
    cfg.params = custom_params(mu, K, K);
    cfg.right_barrier = BarrierMode::KillAt;
    cfg.init = InitialCondition::point_mass(x0);
    cfg.horizon = t;
    cfg.checkpoint_times = {t};
    cfg.dt_max = 1.0;
    cfg.seed = seed;
    cfg.record_genealogy = false;
    return cfg;
}

} // namespace

TEST_CASE("stable profile sampling")
{
    const auto params = analytics::derive_params(10000);
    const auto xs = sample_stable_profile(100000, params, 5);
    for (double x : xs) {
        REQUIRE(x > 0.0);
        REQUIRE(x < params.L);
    }
    const auto ks = stats::ks_test(xs, [&](double x) { return analytics::stable_profile_cdf(x, params.mu, params.L); });
    CHECK(ks.statistic < 1.36 / std::sqrt(100000.0));

    // E[Z(0)]/N by quadrature against the sample mean of the Z summand.
    const double mass = analytics::stable_profile_mass(params.mu, params.L);
    const double oracle =
        quad::integrate(
            [&](double y) {
                return std::exp(params.mu * y) * std::sin(kPi * y / params.L)
                     * analytics::stable_profile_weight(y, params.mu, params.L) / mass;
            },
            0.0, params.L, 1e-12)
            .value;
    std::vector<double> z;
    for (double x : xs) z.push_back(std::exp(params.mu * x) * std::sin(kPi * x / params.L));
    const auto m = stats::mean_se(z);
    CHECK(std::abs(m.mean - oracle) < 3 * m.se);
}

TEST_CASE("statistics")
{
    const auto p = custom_params(1.2, 6.0, 6.0);
    const auto one = statistics({3.0}, p);
    CHECK(one.Z == doctest::Approx(std::exp(1.2 * 3.0)).epsilon(1e-15));
    CHECK(one.Y == doctest::Approx(std::exp(1.2 * 3.0)).epsilon(1e-15));
    CHECK(one.M == 1);
    const auto beyond = statistics({6.5}, p);
    CHECK(beyond.Z == 0.0);
    CHECK(beyond.Y == doctest::Approx(std::exp(1.2 * 6.5)));
    const auto a = statistics({0.5, 2.0}, p);
    const auto b = statistics({4.4, 7.0}, p);
    const auto ab = statistics({0.5, 2.0, 4.4, 7.0}, p);
    CHECK(ab.Z == doctest::Approx(a.Z + b.Z).epsilon(1e-15));
    CHECK(ab.Y == doctest::Approx(a.Y + b.Y).epsilon(1e-15));
    CHECK(ab.M == a.M + b.M);
}

TEST_CASE("segment increments and absorption")
{
    // Far from the barrier: Gaussian increment with mean -mu h, variance h.
    const double mu = 0.8;
    const double h = 0.7;
    std::vector<double> d;
    const Barrier none{BarrierMode::None, 0.0};
    for (int i = 0; i < 100000; ++i) {
        rng::Stream s(3, rng::root_stream(i));
        d.push_back(advance_segment(1000.0, h, mu, none, false, s).x - 1000.0);
    }
    const auto m = stats::mean_se(d);
    CHECK(std::abs(m.mean + mu * h) < 4 * m.se);
    std::vector<double> sq;
    for (double v : d) sq.push_back((v + mu * h) * (v + mu * h));
    const auto v = stats::mean_se(sq);
    CHECK(std::abs(v.mean - h) < 4 * v.se);

    // Absorption probability: closed-form first passage, for several step caps.
    const double oracle = absorbed_by(0.5, mu, 1.0);
    Proportion prev{};
    for (double dt : {1.0, 0.5, 0.25, 0.05}) {
        const auto est = absorption_estimate(0.5, mu, 1.0, dt, 100000, 17 + std::uint64_t(dt * 100));
        CHECK(std::abs(est.p - oracle) < 3 * est.se);
        if (dt < 1.0) CHECK(std::abs(est.p - prev.p) < 2 * std::hypot(est.se, prev.se));
        prev = est;
    }
}

TEST_CASE("two-sided segment matches strip mass")
{
    // One substep with both barriers: P(survive, end in [a, b]) from the killed density.
    const double K = 2.0;
    const double x0 = 0.6;
    const double h = 1.3;
    const Barrier strip{BarrierMode::KillAt, K};
    int alive = 0;
    int upper = 0;
    int lower = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        rng::Stream s(8, rng::root_stream(i));
        const auto seg = advance_segment(x0, h, 0.0, strip, false, s);
        if (!seg.killed)
            ++alive;
        else if (seg.killed_upper)
            ++upper;
        else
            ++lower;
    }
    const analytics::StripSpec spec{K, 0.0, std::nullopt};
    const double survive = analytics::strip_mass(h, x0, 0.0, K, spec) * std::exp(-h);
    const double p = double(alive) / n;
    CHECK(std::abs(p - survive) < 4 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("step_population with zero time is the identity")
{
    SimConfig cfg = strip_config(4.0, 1.0, 2.0, 1.0, 1);
    ParticleSystem sys;
    sys.x = {1.0, 2.0};
    sys.next_branch = {0.5, 0.7};
    sys.stream = {11, 12};
    sys.counter = {3, 4};
    sys.hit = {0, 0};
    sys.parent = {0, 0};
    const auto r = step_population(sys, 0.0, cfg);
    CHECK(r.system.x == sys.x);
    CHECK(r.system.stream == sys.stream);
    CHECK(r.system.counter == sys.counter);
    CHECK(r.events.births == 0);
    CHECK_THROWS_AS(step_population(sys, -1.0, cfg), std::invalid_argument);
}

TEST_CASE("runs are reproducible across thread counts")
{
    SimConfig cfg;
    cfg.params = analytics::derive_params(1000);
    cfg.right_barrier = BarrierMode::KillAt;
    cfg.init = InitialCondition::stable_profile(300);
    cfg.horizon = 6.0;
    cfg.checkpoint_times = {1.0, 2.5, 4.0, 6.0};
    cfg.dt_max = 0.5;
    cfg.seed = 99;
    cfg.threads = 1;
    const auto a = run(cfg);
    cfg.threads = 3;
    const auto b = run(cfg);
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
        CHECK(a.trajectory[i].Z == b.trajectory[i].Z);
        CHECK(a.trajectory[i].Y == b.trajectory[i].Y);
        CHECK(a.trajectory[i].M == b.trajectory[i].M);
        CHECK(a.trajectory[i].R == b.trajectory[i].R);
    }
    CHECK(genealogy_to_json(a.genealogy) == genealogy_to_json(b.genealogy));
    std::ostringstream ca;
    std::ostringstream cb;
    write_trajectory_csv(ca, a.trajectory);
    write_trajectory_csv(cb, b.trajectory);
    CHECK(ca.str() == cb.str());

    cfg.seed = 100;
    CHECK(genealogy_to_json(run(cfg).genealogy) != genealogy_to_json(a.genealogy));
}

TEST_CASE("conservation, barrier and genealogy consistency")
{
    SimConfig cfg;
    cfg.params = analytics::derive_params(500);
    cfg.right_barrier = BarrierMode::KillAt;
    cfg.init = InitialCondition::stable_profile(200);
    cfg.horizon = 8.0;
    cfg.checkpoint_times = {2.0, 4.0, 6.0, 8.0};
    cfg.seed = 4;
    const auto r = run(cfg);
    REQUIRE_FALSE(r.aborted);
    const auto& tr = r.trajectory;
    CHECK(tr.back().M == tr.front().M + r.events.births - r.events.deaths_lower - r.events.deaths_upper);
    std::int64_t hits = 0;
    for (const auto& row : tr) hits += row.R;
    CHECK(hits == r.events.deaths_upper);
    CHECK(std::int64_t(r.hits.hit_times.size()) == hits);

    const auto& gens = r.genealogy.generations;
    REQUIRE(gens.size() == tr.size());
    for (std::size_t k = 0; k < gens.size(); ++k) {
        CHECK(gens[k].time == tr[k].t);
        CHECK(std::int64_t(gens[k].x.size()) == tr[k].M);
        for (double x : gens[k].x) {
            CHECK(x > 0.0);
            CHECK(x < cfg.params.L_A);
        }
        if (k > 0)
            for (std::size_t i = 0; i < gens[k].parent.size(); ++i) {
                CHECK(gens[k].parent[i] < gens[k - 1].x.size());
                if (i > 0) CHECK(gens[k].parent[i - 1] <= gens[k].parent[i]);
            }
    }

    // Round trip through JSON.
    const auto back = genealogy_from_json(genealogy_to_json(r.genealogy));
    REQUIRE(back.generations.size() == gens.size());
    for (std::size_t k = 0; k < gens.size(); ++k) {
        CHECK(back.generations[k].x == gens[k].x);
        CHECK(back.generations[k].id == gens[k].id);
        if (k > 0) CHECK(back.generations[k].parent == gens[k].parent);
    }
    CHECK(back.mu == r.genealogy.mu);
}

TEST_CASE("martingale and mean count in the strip")
{
    const double K = 5.0;
    const double mu = 1.0;
    const double x0 = 2.0;
    const double t = 2.5;
    const double growth = 1 - mu * mu / 2 - kPi * kPi / (2 * K * K);
    std::vector<double> zs;
    std::vector<double> ms;
    for (int rep = 0; rep < 3000; ++rep) {
        const auto r = run(strip_config(K, mu, x0, t, rng::root_stream(rep)));
        zs.push_back(r.trajectory.back().Z * std::exp(-growth * t));
        ms.push_back(double(r.trajectory.back().M));
    }
    const auto z = stats::mean_se(zs);
    CHECK(std::abs(z.mean - std::exp(mu * x0) * std::sin(kPi * x0 / K)) < 3 * z.se);
    const auto m = stats::mean_se(ms);
    const double oracle = analytics::strip_mass(t, x0, 0.0, K, analytics::StripSpec{K, mu, std::nullopt});
    CHECK(std::abs(m.mean - oracle) < 3 * m.se);
}

TEST_CASE("second moment of a population count")
{
    // E[N^2] for N = #particles in [a, b] at time t, by the many-to-two formula:
    // E[N] + 2 int_0^t int q_s(x, z) m(t - s, z)^2 dz ds.
    const double K = 3.0;
    const double mu = 1.0;
    const double x0 = 1.5;
    const double t = 2.0;
    const double a = 1.0;
    const double b = 2.0;
    const analytics::StripSpec spec{K, mu, std::nullopt, 1e-12};
    auto m = [&](double r, double z) {
        if (r <= 0.0) return (z >= a && z <= b) ? 1.0 : 0.0;
        return analytics::strip_mass(r, z, a, b, spec);
    };
    auto inner = [&](double s) {
        auto f = [&](double z) {
            if (z <= 0.0 || z >= K) return 0.0;
            const double mm = m(t - s, z);
            return analytics::bbm_density_q(s, x0, z, spec).value * mm * mm;
        };
        double total = 0.0;
        for (auto [lo, hi] : {std::pair{0.0, a}, std::pair{a, b}, std::pair{b, K}})
            total += quad::integrate(f, lo, hi, 1e-9, 20).value;
        return total;
    };
    const double mean = analytics::strip_mass(t, x0, a, b, spec);
    const double cross = quad::integrate(inner, 0.0, t, 1e-7, 16).value;
    const double oracle = mean + 2.0 * cross;

    SimConfig cfg = strip_config(K, mu, x0, t, 0);
    std::vector<double> sq;
    for (int rep = 0; rep < 20000; ++rep) {
        cfg.seed = rng::root_stream(rep);
        const auto r = run(cfg);
        double n = 0;
        for (double x : r.final_state.x) n += (x >= a && x <= b) ? 1.0 : 0.0;
        sq.push_back(n * n);
    }
    const auto e = stats::mean_se(sq);
    CHECK(std::abs(e.mean - oracle) < 4 * e.se);
}

TEST_CASE("recorded hits match killed counts in law")
{
    SimConfig cfg;
    cfg.params = custom_params(1.1, 3.0, 3.0);
    cfg.init = InitialCondition::point_mass(1.5, 3);
    cfg.horizon = 3.0;
    cfg.checkpoint_times = {1.0, 2.0, 3.0};
    cfg.record_genealogy = false;
    std::vector<double> killed;
    std::vector<double> recorded;
    for (int rep = 0; rep < 4000; ++rep) {
        cfg.seed = rng::root_stream(rep);
        cfg.right_barrier = BarrierMode::KillAt;
        killed.push_back(double(run(cfg).events.deaths_upper));
        cfg.seed = rng::root_stream(rep + 100000);
        cfg.right_barrier = BarrierMode::RecordHits;
        const auto r = run(cfg);
        recorded.push_back(double(r.events.hits));
        std::int64_t sum = 0;
        for (auto c : r.hits.counts) sum += c;
        CHECK(sum == r.events.hits);
    }
    const auto k = stats::mean_se(killed);
    const auto h = stats::mean_se(recorded);
    CHECK(k.mean > 0.1);
    CHECK(std::abs(k.mean - h.mean) < 4 * std::hypot(k.se, h.se));
}

TEST_CASE("occupation time matches the Green function")
{
    const double K = 5.0;
    const double x = 0.3 * K;
    const double oracle =
        quad::integrate([&](double y) { return analytics::green_strip(x, y, K); }, 0.6 * K, 0.8 * K, 1e-13).value;
    CHECK(oracle == doctest::Approx(0.9));
    const auto est = occupation_time_estimate(x, K, 0.6 * K, 0.8 * K, 20000, 3);
    CHECK(std::abs(est.mean - oracle) < 3 * est.se);
}

TEST_CASE("extinction and abort")
{
    SimConfig cfg;
    cfg.params = custom_params(3.0, 5.0, 5.0);
    cfg.init = InitialCondition::point_mass(0.3, 2);
    cfg.horizon = 20.0;
    cfg.checkpoint_times = {5.0, 10.0, 15.0, 20.0};
    cfg.seed = 12;
    const auto r = run(cfg);
    REQUIRE(r.extinction_time.has_value());
    CHECK(*r.extinction_time > 0.0);
    CHECK(*r.extinction_time <= 20.0);
    CHECK(r.trajectory.size() == 5);
    CHECK(r.trajectory.back().M == 0);
    CHECK(r.final_state.size() == 0);

    SimConfig grow;
    grow.params = custom_params(0.0, 50.0, 50.0);
    grow.init = InitialCondition::point_mass(25.0, 1);
    grow.horizon = 20.0;
    grow.checkpoint_times = {10.0, 20.0};
    grow.max_particles = 50;
    const auto g = run(grow);
    CHECK(g.aborted);
    CHECK(g.trajectory.size() < 3);
}

TEST_CASE("configuration validation")
{
    SimConfig cfg = strip_config(4.0, 1.0, 2.0, 1.0, 1);
    CHECK_NOTHROW(validate(cfg));
    auto bad = cfg;
    bad.dt_max = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = cfg;
    bad.init = InitialCondition::point_mass(4.5);
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = cfg;
    bad.checkpoint_times = {0.5, 0.4};
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = cfg;
    bad.checkpoint_times = {2.0};
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    bad = cfg;
    bad.max_particles = 0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    CHECK(effective_checkpoints(cfg) == std::vector<double>{0.0, 1.0});
}

TEST_CASE("trajectory csv format")
{
    std::ostringstream out;
    write_trajectory_csv(out, {{0.1, 1.0 / 3.0, 2.0, 5, 1}});
    CHECK(out.str() == "t,Z,Y,M,R\n0.10000000000000001,0.33333333333333331,2,5,1\n");
}
