#include "bbmlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "bbmlab/parallel.hpp"
#include "bbmlab/rng.hpp"
#include "bbmlab/stats.hpp"

namespace bbmlab::experiments {

namespace {

double log_cubed(std::int64_t N)
{
    return std::pow(std::log(static_cast<double>(N)), 3);
}

engine::SimConfig lineage_config(std::int64_t N, std::uint64_t seed, const LineageOptions& opt)
{
    if (!(opt.sample_time > 0.0) || !(opt.resolution >= 1.0))
        throw std::invalid_argument("lineage options: need sample_time > 0 and resolution >= 1");
    engine::SimConfig cfg;
    cfg.params = analytics::derive_params(N);
    cfg.right_barrier = engine::BarrierMode::None;
    cfg.init = engine::InitialCondition::stable_profile(N);
    const double scale = log_cubed(N);
    const auto steps = static_cast<std::size_t>(std::ceil(opt.sample_time * opt.resolution));
    cfg.horizon = opt.sample_time * scale;
    for (std::size_t i = 1; i <= steps; ++i)
        cfg.checkpoint_times.push_back(std::min(cfg.horizon, static_cast<double>(i) * scale / opt.resolution));
    cfg.checkpoint_times.erase(std::unique(cfg.checkpoint_times.begin(), cfg.checkpoint_times.end()),
                               cfg.checkpoint_times.end());
    cfg.dt_max = 1.0;
    cfg.seed = seed;
    cfg.max_particles = opt.max_particles_factor * N;
    cfg.record_genealogy = true;
    return cfg;
}

// Distinct uniform indices in [0, M) by partial Fisher-Yates.
std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t M, rng::Stream& s)
{
    std::vector<std::size_t> pool(M);
    for (std::size_t i = 0; i < M; ++i) pool[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = i + static_cast<std::size_t>(s.uniform() * static_cast<double>(M - i));
        std::swap(pool[i], pool[std::min(j, M - 1)]);
    }
    pool.resize(n);
    return pool;
}

struct PairRun {
    bool extinct = false;
    bool aborted = false;
    std::vector<double> times;
    std::int64_t censored = 0;
    std::int64_t pairs = 0;
};

PairRun pair_run(std::int64_t N, std::uint64_t seed, const LineageOptions& opt)
{
    PairRun out;
    const auto cfg = lineage_config(N, seed, opt);
    const auto r = engine::run(cfg);
    if (r.aborted) {
        out.aborted = true;
        return out;
    }
    const auto& gens = r.genealogy.generations;
    const std::size_t K = gens.size() - 1;
    const std::size_t M = gens[K].x.size();
    if (M < 2) {
        out.extinct = true;
        return out;
    }
    rng::Stream s(seed, rng::derive_stream(rng::kReplicateBase, 0xFA1125ULL));
    for (std::int64_t p = 0; p < opt.pairs_per_run; ++p) {
        const auto pick = sample_distinct(2, M, s);
        std::size_t a = pick[0];
        std::size_t b = pick[1];
        bool merged = false;
        for (std::size_t k = K; k > 0; --k) {
            a = gens[k].parent[a];
            b = gens[k].parent[b];
            if (a == b) {
                out.times.push_back(gens[K].time - gens[k - 1].time);
                merged = true;
                break;
            }
        }
        if (!merged) ++out.censored;
        ++out.pairs;
    }
    return out;
}

double censored_median(const std::vector<double>& times, std::int64_t censored)
{
    const std::size_t total = times.size() + static_cast<std::size_t>(censored);
    if (total == 0 || 2 * times.size() <= total) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> v = times;
    v.resize(total, std::numeric_limits<double>::infinity());
    return stats::median(v);
}

} // namespace

PairCoalescence pair_coalescence(std::int64_t N, std::int64_t runs, std::uint64_t seed, const LineageOptions& opt)
{
    if (runs <= 0) throw std::invalid_argument("pair_coalescence: need runs > 0");
    std::vector<PairRun> res(static_cast<std::size_t>(runs));
    parallel_for(res.size(), opt.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) res[i] = pair_run(N, rng::derive_stream(seed, i), opt);
    });
    PairCoalescence pc;
    pc.N = N;
    pc.log_cubed = log_cubed(N);
    pc.sample_time = opt.sample_time * pc.log_cubed;
    pc.runs = runs;
    for (const auto& r : res) {
        pc.extinct_runs += r.extinct;
        pc.aborted_runs += r.aborted;
        pc.pairs += r.pairs;
        pc.censored += r.censored;
        pc.times.insert(pc.times.end(), r.times.begin(), r.times.end());
    }
    pc.median = censored_median(pc.times, pc.censored);
    return pc;
}

MrcaReport mrca_scaling_experiment(const std::vector<std::int64_t>& N_list, std::int64_t runs, std::uint64_t seed,
                                   const LineageOptions& opt)
{
    if (N_list.empty() || !std::is_sorted(N_list.begin(), N_list.end()))
        throw std::invalid_argument("mrca_scaling_experiment: N list must be nonempty and ascending");
    MrcaReport rep;
    for (std::size_t i = 0; i < N_list.size(); ++i)
        rep.per_N.push_back(pair_coalescence(N_list[i], runs, rng::derive_stream(seed, static_cast<std::uint64_t>(N_list[i])), opt));
    rep.ratio = rep.per_N.back().median / rep.per_N.front().median;
    rep.predicted = std::pow(std::log(double(N_list.back())) / std::log(double(N_list.front())), 3);
    return rep;
}

PopulationLink population_link(std::int64_t N, std::int64_t runs, std::uint64_t seed, double burn_in_factor,
                               unsigned threads)
{
    if (runs <= 0 || !(burn_in_factor > 0.0)) throw std::invalid_argument("population_link: bad arguments");
    const double logN = std::log(static_cast<double>(N));
    PopulationLink out;
    out.N = N;
    out.burn_in = burn_in_factor * logN * logN;
    out.runs = runs;
    std::vector<double> ratio(static_cast<std::size_t>(runs), std::numeric_limits<double>::quiet_NaN());
    parallel_for(ratio.size(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            engine::SimConfig cfg;
            cfg.params = analytics::derive_params(N);
            cfg.right_barrier = engine::BarrierMode::None;
            cfg.init = engine::InitialCondition::stable_profile(N);
            cfg.horizon = out.burn_in;
            cfg.checkpoint_times = {out.burn_in};
            cfg.seed = rng::derive_stream(seed, i);
            cfg.max_particles = 50 * N;
            cfg.record_genealogy = false;
            const auto r = engine::run(cfg);
            if (r.aborted) continue;
            const auto& last = r.trajectory.back();
            if (last.M > 0 && last.Z > 0.0)
                ratio[i] = static_cast<double>(last.M) * logN * logN / (2.0 * std::numbers::pi * last.Z);
        }
    });
    for (double v : ratio) {
        if (std::isnan(v))
            ++out.empty_runs;
        else
            out.ratios.push_back(v);
    }
    out.median = stats::median(out.ratios);
    return out;
}

SampledGenealogy sampled_genealogy(std::int64_t N, std::size_t n, std::int64_t runs, std::uint64_t seed,
                                   double clock_rate, const std::vector<double>& s_grid, const LineageOptions& opt)
{
    if (n < 2 || runs <= 0 || !(clock_rate > 0.0)) throw std::invalid_argument("sampled_genealogy: bad arguments");
    const double scale = log_cubed(N);
    const double T = opt.sample_time * scale;
    for (double s : s_grid)
        if (!(s >= 0.0) || s * scale / clock_rate > T)
            throw std::invalid_argument("sampled_genealogy: clock grid reaches before time 0");

    struct One {
        bool used = false;
        std::vector<double> blocks;
        std::int64_t mergers = 0;
        std::int64_t multiple = 0;
    };
    std::vector<One> res(static_cast<std::size_t>(runs));
    parallel_for(res.size(), opt.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto cfg = lineage_config(N, rng::derive_stream(seed, i), opt);
            const auto r = engine::run(cfg);
            if (r.aborted) continue;
            const auto& gens = r.genealogy.generations;
            const std::size_t K = gens.size() - 1;
            if (gens[K].x.size() < n) continue;
            rng::Stream s(cfg.seed, rng::derive_stream(rng::kReplicateBase, 0x5A3B1EULL));
            auto lineages = sample_distinct(n, gens[K].x.size(), s);
            std::sort(lineages.begin(), lineages.end());
            // Distinct ancestors per generation, walking back.
            std::vector<std::size_t> count(K + 1, 0);
            count[K] = n;
            One& o = res[i];
            for (std::size_t k = K; k > 0; --k) {
                std::vector<std::uint32_t> up;
                up.reserve(lineages.size());
                for (auto a : lineages) up.push_back(gens[k].parent[a]);
                // Parents are sorted because generations are grouped by parent.
                std::size_t largest = 0;
                std::size_t run = 0;
                std::vector<std::size_t> next;
                for (std::size_t q = 0; q < up.size(); ++q) {
                    if (q > 0 && up[q] == up[q - 1]) {
                        ++run;
                    } else {
                        run = 1;
                        next.push_back(up[q]);
                    }
                    largest = std::max(largest, run);
                }
                if (next.size() < lineages.size()) {
                    ++o.mergers;
                    if (largest >= 3) ++o.multiple;
                }
                lineages = std::move(next);
                count[k - 1] = lineages.size();
            }
            for (double sv : s_grid) {
                const double t = T - sv * scale / clock_rate;
                std::size_t k = K;
                while (k > 0 && gens[k].time > t + 1e-9 * std::max(1.0, T)) --k;
                o.blocks.push_back(static_cast<double>(count[k]));
            }
            o.used = true;
        }
    });
    SampledGenealogy out;
    out.N = N;
    out.n = n;
    out.clock_rate = clock_rate;
    out.s_grid = s_grid;
    out.mean_blocks.assign(s_grid.size(), 0.0);
    for (const auto& o : res) {
        if (!o.used) continue;
        ++out.runs_used;
        out.merger_events += o.mergers;
        out.multiple_events += o.multiple;
        for (std::size_t g = 0; g < s_grid.size(); ++g) out.mean_blocks[g] += o.blocks[g];
    }
    if (out.runs_used > 0)
        for (auto& v : out.mean_blocks) v /= static_cast<double>(out.runs_used);
    return out;
}

double calibrate_clock(const PairCoalescence& pc)
{
    if (!(pc.median > 0.0) || !std::isfinite(pc.median))
        throw std::domain_error("calibrate_clock: pair median undefined");
    return std::numbers::ln2 * pc.log_cubed / pc.median;
}

} // namespace bbmlab::experiments
