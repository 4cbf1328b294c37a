#include "bbmlab/engine.hpp"

#include "bbmlab/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace bbmlab::engine {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

std::uint64_t initial_stream(std::size_t i)
{
    return rng::derive_stream(rng::kInitStream, i);
}

double invert_profile_cdf(double u, double mu, double L)
{
    double lo = 0.0;
    double hi = L;
    for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * L; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (analytics::stable_profile_cdf(mid, mu, L) < u)
            lo = mid;
        else
            hi = mid;
    }
    return std::clamp(0.5 * (lo + hi), std::nextafter(0.0, 1.0), std::nextafter(L, 0.0));
}

struct Live {
    double x;
    double t;
    double next_branch;
    rng::Stream rng;
    bool hit;
};

struct ChunkOut {
    ParticleSystem survivors;
    EventCounts events;
    std::vector<double> hit_times;
    double last_death = -std::numeric_limits<double>::infinity();
    bool aborted = false;
};

void simulate_root(const ParticleSystem& sys, std::size_t root, double t_end, const SimConfig& cfg,
                   ChunkOut& out)
{
    const double mu = cfg.params.mu;
    const Barrier barrier{cfg.right_barrier, cfg.params.L_A};
    const auto cap = static_cast<std::size_t>(cfg.max_particles);
    std::vector<Live> stack;
    stack.push_back(Live{sys.x[root], sys.time, sys.next_branch[root],
                         rng::Stream(cfg.seed, sys.stream[root], sys.counter[root]), sys.hit[root] != 0});
    std::size_t produced = 0;

    while (!stack.empty()) {
        Live p = stack.back();
        stack.pop_back();
        for (;;) {
            const double target = std::min({p.next_branch, t_end, p.t + cfg.dt_max});
            const auto seg = advance_segment(p.x, target - p.t, mu, barrier, p.hit, p.rng);
            p.t = target;
            if (seg.killed) {
                if (seg.killed_upper) {
                    ++out.events.deaths_upper;
                    ++out.events.hits;
                    out.hit_times.push_back(target);
                } else {
                    ++out.events.deaths_lower;
                }
                out.last_death = std::max(out.last_death, target);
                break;
            }
            p.x = seg.x;
            if (seg.hit_upper) {
                p.hit = true;
                ++out.events.hits;
                out.hit_times.push_back(target);
            }
            if (target == p.next_branch) {
                ++out.events.births;
                const std::uint64_t parent_id = p.rng.id();
                Live c0{p.x, p.t, 0.0, rng::Stream(cfg.seed, rng::derive_stream(parent_id, 0)), p.hit};
                Live c1{p.x, p.t, 0.0, rng::Stream(cfg.seed, rng::derive_stream(parent_id, 1)), p.hit};
                c0.next_branch = p.t + c0.rng.exponential();
                c1.next_branch = p.t + c1.rng.exponential();
                stack.push_back(c1);
                p = c0;
                if (stack.size() + produced > cap) {
                    out.aborted = true;
                    return;
                }
                continue;
            }
            if (target == t_end) {
                auto& s = out.survivors;
                s.x.push_back(p.x);
                s.next_branch.push_back(p.next_branch);
                s.stream.push_back(p.rng.id());
                s.counter.push_back(p.rng.counter());
                s.hit.push_back(p.hit ? 1 : 0);
                s.parent.push_back(static_cast<std::uint32_t>(root));
                ++produced;
                break;
            }
        }
    }
}

void append(ParticleSystem& dst, const ParticleSystem& src)
{
    dst.x.insert(dst.x.end(), src.x.begin(), src.x.end());
    dst.next_branch.insert(dst.next_branch.end(), src.next_branch.begin(), src.next_branch.end());
    dst.stream.insert(dst.stream.end(), src.stream.begin(), src.stream.end());
    dst.counter.insert(dst.counter.end(), src.counter.begin(), src.counter.end());
    dst.hit.insert(dst.hit.end(), src.hit.begin(), src.hit.end());
    dst.parent.insert(dst.parent.end(), src.parent.begin(), src.parent.end());
}

ParticleSystem permuted(const ParticleSystem& s, const std::vector<std::size_t>& order)
{
    ParticleSystem out;
    out.time = s.time;
    const auto n = order.size();
    out.x.resize(n);
    out.next_branch.resize(n);
    out.stream.resize(n);
    out.counter.resize(n);
    out.hit.resize(n);
    out.parent.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = order[i];
        out.x[i] = s.x[j];
        out.next_branch[i] = s.next_branch[j];
        out.stream[i] = s.stream[j];
        out.counter[i] = s.counter[j];
        out.hit[i] = s.hit[j];
        out.parent[i] = s.parent[j];
    }
    return out;
}

} // namespace

InitialCondition InitialCondition::stable_profile(std::int64_t count)
{
    InitialCondition c;
    c.kind = Kind::StableProfile;
    c.count = count;
    return c;
}

InitialCondition InitialCondition::point_mass(double x, std::int64_t count)
{
    InitialCondition c;
    c.kind = Kind::PointMass;
    c.x = x;
    c.count = count;
    return c;
}

InitialCondition InitialCondition::explicit_positions(std::vector<double> xs)
{
    InitialCondition c;
    c.kind = Kind::Explicit;
    c.positions = std::move(xs);
    c.count = static_cast<std::int64_t>(c.positions.size());
    return c;
}

analytics::ModelParams custom_params(double mu, double L, double L_A)
{
    if (!(mu >= 0.0) || !(L > 0.0) || !(L_A > 0.0))
        throw std::invalid_argument("custom_params: need mu >= 0, L > 0, L_A > 0");
    analytics::ModelParams p;
    p.mu_squared = mu * mu;
    p.mu = mu;
    p.L = L;
    p.L_A = L_A;
    return p;
}

void validate(const SimConfig& cfg)
{
    if (!(cfg.dt_max > 0.0)) throw std::invalid_argument("config: dt_max must be positive");
    if (!(cfg.horizon >= 0.0)) throw std::invalid_argument("config: horizon must be nonnegative");
    if (!(cfg.params.mu >= 0.0) || !(cfg.params.L > 0.0)) throw std::invalid_argument("config: need mu >= 0, L > 0");
    if (cfg.right_barrier != BarrierMode::None && !(cfg.params.L_A > 0.0))
        throw std::invalid_argument("config: right barrier needs L_A > 0");
    for (std::size_t i = 0; i < cfg.checkpoint_times.size(); ++i) {
        const double t = cfg.checkpoint_times[i];
        if (!(t >= 0.0 && t <= cfg.horizon)) throw std::invalid_argument("config: checkpoint outside [0, horizon]");
        if (i > 0 && !(t > cfg.checkpoint_times[i - 1]))
            throw std::invalid_argument("config: checkpoints must be strictly increasing");
    }
    const auto& init = cfg.init;
    if (init.count < 0) throw std::invalid_argument("config: negative initial count");
    if (cfg.max_particles < init.count) throw std::invalid_argument("config: max_particles below initial count");
    if (init.count > std::int64_t{kNoParent}) throw std::invalid_argument("config: too many initial particles");
    const double upper = cfg.right_barrier == BarrierMode::None ? INFINITY : cfg.params.L_A;
    auto check = [&](double x) {
        if (!(x > 0.0 && x < upper)) throw std::invalid_argument("config: initial position outside (0, barrier)");
    };
    if (init.kind == InitialCondition::Kind::PointMass) check(init.x);
    if (init.kind == InitialCondition::Kind::Explicit) {
        if (init.positions.size() != static_cast<std::size_t>(init.count))
            throw std::invalid_argument("config: explicit positions do not match count");
        for (double x : init.positions) check(x);
    }
    if (init.kind == InitialCondition::Kind::StableProfile && cfg.right_barrier != BarrierMode::None
        && cfg.params.L_A < cfg.params.L)
        throw std::invalid_argument("config: stable profile extends beyond the right barrier");
}

Statistics statistics(const std::vector<double>& x, const analytics::ModelParams& params)
{
    Statistics s;
    for (double xi : x) {
        const double e = std::exp(params.mu * xi);
        if (xi <= params.L) s.Z += e * std::sin(kPi * xi / params.L);
        s.Y += e;
    }
    s.M = static_cast<std::int64_t>(x.size());
    return s;
}

std::vector<double> sample_stable_profile(std::int64_t count, const analytics::ModelParams& params,
                                          std::uint64_t seed)
{
    if (count < 0) throw std::invalid_argument("sample_stable_profile: negative count");
    if (!(params.L > 0.0)) throw std::invalid_argument("sample_stable_profile: L must be positive");
    std::vector<double> out(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < out.size(); ++i) {
        rng::Stream s(seed, initial_stream(i));
        out[i] = invert_profile_cdf(s.uniform(), params.mu, params.L);
    }
    return out;
}

SegmentOutcome advance_segment(double x0, double h, double mu, const Barrier& barrier, bool already_hit,
                               rng::Stream& stream)
{
    SegmentOutcome out;
    out.x = x0;
    if (!(h > 0.0)) return out;
    const double x1 = x0 - mu * h + std::sqrt(h) * stream.normal();
    out.x = x1;
    const double K = barrier.level;

    switch (barrier.mode) {
    case BarrierMode::None:
        if (x1 <= 0.0 || stream.uniform() >= analytics::halfline_bridge_survival(x0, x1, h)) out.killed = true;
        return out;

    case BarrierMode::KillAt: {
        if (x1 <= 0.0) {
            out.killed = true;
            return out;
        }
        if (x1 >= K) {
            out.killed = out.killed_upper = true;
            return out;
        }
        if (stream.uniform() < analytics::strip_bridge_survival(x0, x1, h, K)) return out;
        out.killed = true;
        const double p0 = std::exp(-2.0 * x0 * x1 / h);
        const double pu = std::exp(-2.0 * (K - x0) * (K - x1) / h);
        out.killed_upper = stream.uniform() * (p0 + pu) < pu;
        return out;
    }

    case BarrierMode::RecordHits: {
        if (x1 <= 0.0) {
            out.killed = true;
            return out;
        }
        const double s0 = analytics::halfline_bridge_survival(x0, x1, h);
        if (stream.uniform() >= s0) {
            out.killed = true;
            return out;
        }
        if (already_hit) return out;
        if (x0 >= K || x1 >= K) {
            out.hit_upper = true;
            return out;
        }
        // P(no hit | survived at 0) = strip survival / half-line survival.
        const double s2 = analytics::strip_bridge_survival(x0, x1, h, K);
        if (stream.uniform() * s0 >= s2) out.hit_upper = true;
        return out;
    }
    }
    return out;
}

StepResult step_population(const ParticleSystem& sys, double dt, const SimConfig& cfg)
{
    if (!(dt >= 0.0)) throw std::invalid_argument("step_population: dt must be nonnegative");
    StepResult result;
    const std::size_t n = sys.size();
    if (dt == 0.0) {
        result.system = sys;
        result.system.parent.resize(n);
        std::iota(result.system.parent.begin(), result.system.parent.end(), std::uint32_t{0});
        return result;
    }
    const double t_end = sys.time + dt;

    // Chunk boundaries depend only on n, so the merged output does not depend
    // on the number of threads.
    const std::size_t chunk = 64;
    const std::size_t chunks = (n + chunk - 1) / chunk;
    std::vector<ChunkOut> outs(chunks);
    parallel_for(chunks, cfg.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            const std::size_t lo = c * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            for (std::size_t r = lo; r < hi && !outs[c].aborted; ++r) simulate_root(sys, r, t_end, cfg, outs[c]);
        }
    });

    result.system.time = t_end;
    double last = -std::numeric_limits<double>::infinity();
    for (auto& o : outs) {
        append(result.system, o.survivors);
        result.events.births += o.events.births;
        result.events.deaths_lower += o.events.deaths_lower;
        result.events.deaths_upper += o.events.deaths_upper;
        result.events.hits += o.events.hits;
        result.hit_times.insert(result.hit_times.end(), o.hit_times.begin(), o.hit_times.end());
        last = std::max(last, o.last_death);
        result.aborted = result.aborted || o.aborted;
    }
    std::sort(result.hit_times.begin(), result.hit_times.end());
    if (last > -std::numeric_limits<double>::infinity()) result.last_death = last;
    if (static_cast<std::int64_t>(result.system.size()) > cfg.max_particles) result.aborted = true;
    return result;
}

std::optional<std::size_t> GenealogyLog::find(double t) const
{
    for (std::size_t i = 0; i < generations.size(); ++i)
        if (generations[i].time == t) return i;
    return std::nullopt;
}

std::vector<double> effective_checkpoints(const SimConfig& cfg)
{
    std::vector<double> cps = cfg.checkpoint_times;
    if (cps.empty() || cps.front() != 0.0) cps.insert(cps.begin(), 0.0);
    if (cps.back() != cfg.horizon) cps.push_back(cfg.horizon);
    return cps;
}

RunResult run(const SimConfig& cfg)
{
    validate(cfg);
    const auto cps = effective_checkpoints(cfg);
    RunResult result;
    result.genealogy.mu = cfg.params.mu;
    result.genealogy.z_level = cfg.params.L;

    // Initial particles, each on its own stream.
    ParticleSystem sys;
    const auto n0 = static_cast<std::size_t>(cfg.init.count);
    std::vector<double> key(n0);
    for (std::size_t i = 0; i < n0; ++i) {
        rng::Stream s(cfg.seed, initial_stream(i));
        double x = cfg.init.x;
        if (cfg.init.kind == InitialCondition::Kind::StableProfile)
            x = invert_profile_cdf(s.uniform(), cfg.params.mu, cfg.params.L);
        else if (cfg.init.kind == InitialCondition::Kind::Explicit)
            x = cfg.init.positions[i];
        const double branch = s.exponential();
        key[i] = s.uniform();
        sys.x.push_back(x);
        sys.next_branch.push_back(branch);
        sys.stream.push_back(s.id());
        sys.counter.push_back(s.counter());
        sys.hit.push_back(0);
        sys.parent.push_back(kNoParent);
    }
    {
        std::vector<std::size_t> order(n0);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
        sys = permuted(sys, order);
    }

    auto record = [&](const ParticleSystem& s, std::int64_t R) {
        const auto st = statistics(s.x, cfg.params);
        result.trajectory.push_back({s.time, st.Z, st.Y, st.M, R});
        result.hits.counts.push_back(R);
        if (cfg.record_genealogy) result.genealogy.generations.push_back({s.time, s.x, s.parent, s.stream});
    };
    record(sys, 0);
    {
        const double logN = std::log(std::max<double>(3.0, static_cast<double>(cfg.params.N)));
        const double N = cfg.params.N > 0 ? static_cast<double>(cfg.params.N) : static_cast<double>(n0);
        result.initial_y_diagnostic = result.trajectory.front().Y / (std::max(N, 1.0) * std::pow(logN, 3));
    }

    for (std::size_t k = 1; k < cps.size(); ++k) {
        if (sys.size() == 0) {
            ParticleSystem empty;
            empty.time = cps[k];
            record(empty, 0);
            continue;
        }
        auto step = step_population(sys, cps[k] - cps[k - 1], cfg);
        if (step.aborted) {
            result.aborted = true;
            break;
        }
        step.system.time = cps[k];
        result.events.births += step.events.births;
        result.events.deaths_lower += step.events.deaths_lower;
        result.events.deaths_upper += step.events.deaths_upper;
        result.events.hits += step.events.hits;
        result.hits.hit_times.insert(result.hits.hit_times.end(), step.hit_times.begin(), step.hit_times.end());

        // Lexicographic order: parent groups are already in parent order;
        // siblings are ordered by a uniform key from their own stream.
        ParticleSystem next = std::move(step.system);
        const std::size_t m = next.size();
        std::vector<double> sibling_key(m);
        for (std::size_t i = 0; i < m; ++i) {
            rng::Stream s(cfg.seed, next.stream[i], next.counter[i]);
            sibling_key[i] = s.uniform();
            next.counter[i] = s.counter();
        }
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (next.parent[a] != next.parent[b]) return next.parent[a] < next.parent[b];
            return sibling_key[a] < sibling_key[b];
        });
        sys = permuted(next, order);
        record(sys, static_cast<std::int64_t>(step.hit_times.size()));
        if (sys.size() == 0 && step.last_death) result.extinction_time = *step.last_death;
    }
    result.final_state = sys;
    return result;
}

OccupationEstimate occupation_time_estimate(double x0, double K, double a, double b, std::int64_t paths,
                                            std::uint64_t seed, double probe_rate)
{
    if (!(K > 0.0) || !(x0 > 0.0 && x0 < K)) throw std::invalid_argument("occupation: need 0 < x0 < K");
    if (!(probe_rate > 0.0) || paths < 2) throw std::invalid_argument("occupation: need probe_rate > 0, paths >= 2");
    const Barrier barrier{BarrierMode::KillAt, K};
    double sum = 0.0;
    double sum2 = 0.0;
    for (std::int64_t p = 0; p < paths; ++p) {
        rng::Stream s(seed, rng::root_stream(static_cast<std::uint64_t>(p)));
        double x = x0;
        double count = 0.0;
        for (;;) {
            const auto seg = advance_segment(x, s.exponential() / probe_rate, 0.0, barrier, false, s);
            if (seg.killed) break;
            x = seg.x;
            if (x >= a && x <= b) count += 1.0;
        }
        const double est = count / probe_rate;
        sum += est;
        sum2 += est * est;
    }
    const double n = static_cast<double>(paths);
    OccupationEstimate out;
    out.mean = sum / n;
    out.se = std::sqrt(std::max(0.0, sum2 / n - out.mean * out.mean) / (n - 1.0));
    out.paths = paths;
    return out;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows)
{
    out << "t,Z,Y,M,R\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%lld,%lld\n", r.t, r.Z, r.Y, static_cast<long long>(r.M),
                      static_cast<long long>(r.R));
        out << buf;
    }
}

std::string genealogy_to_json(const GenealogyLog& log)
{
    nlohmann::json j;
    j["mu"] = log.mu;
    j["z_level"] = log.z_level;
    j["generations"] = nlohmann::json::array();
    const Generation* prev = nullptr;
    for (const auto& g : log.generations) {
        nlohmann::json gen;
        gen["t"] = g.time;
        auto particles = nlohmann::json::array();
        for (std::size_t i = 0; i < g.x.size(); ++i) {
            nlohmann::json parent = nullptr;
            if (prev && g.parent[i] != kNoParent) parent = prev->id[g.parent[i]];
            particles.push_back({g.id[i], parent, g.x[i]});
        }
        gen["particles"] = std::move(particles);
        j["generations"].push_back(std::move(gen));
        prev = &g;
    }
    return j.dump();
}

GenealogyLog genealogy_from_json(const std::string& text)
{
    const auto j = nlohmann::json::parse(text);
    GenealogyLog log;
    log.mu = j.at("mu").get<double>();
    log.z_level = j.at("z_level").get<double>();
    std::unordered_map<std::uint64_t, std::uint32_t> prev_index;
    for (const auto& gen : j.at("generations")) {
        Generation g;
        g.time = gen.at("t").get<double>();
        std::unordered_map<std::uint64_t, std::uint32_t> index;
        for (const auto& p : gen.at("particles")) {
            const auto id = p.at(0).get<std::uint64_t>();
            g.id.push_back(id);
            g.x.push_back(p.at(2).get<double>());
            if (p.at(1).is_null()) {
                g.parent.push_back(kNoParent);
            } else {
                const auto it = prev_index.find(p.at(1).get<std::uint64_t>());
                if (it == prev_index.end()) throw std::invalid_argument("genealogy json: unknown parent id");
                g.parent.push_back(it->second);
            }
            index.emplace(id, static_cast<std::uint32_t>(g.id.size() - 1));
        }
        prev_index = std::move(index);
        log.generations.push_back(std::move(g));
    }
    return log;
}

} // namespace bbmlab::engine
