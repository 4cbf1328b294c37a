// bbmlab command-line front end.
//
// Every subcommand reads its parameters from section [<subcommand>] of an
// optional --config file; command-line flags override the file.  The
// resolved configuration is written next to the outputs as
// <subcommand>.ini and its hash heads every output file.
//
// Exit codes: 0 ok, 1 soft criteria warned, 2 usage, 3 invalid config,
// 4 hard criterion failed, 5 runtime error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "bbmlab/acceptance.hpp"
#include "bbmlab/analytics.hpp"
#include "bbmlab/coalescent.hpp"
#include "bbmlab/config.hpp"
#include "bbmlab/csbp.hpp"
#include "bbmlab/engine.hpp"
#include "bbmlab/fkpp.hpp"
#include "bbmlab/genealogy.hpp"
#include "bbmlab/rng.hpp"

using namespace bbmlab;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kSoft = 1, kUsage = 2, kConfig = 3, kHard = 4, kRuntime = 5 };

struct Command {
    std::string section;
    CLI::App* app = nullptr;
    std::map<std::string, std::string> flags;  ///< key -> raw flag value
    std::map<std::string, CLI::Option*> options;

    void add(const std::string& key, const std::string& help)
    {
        options[key] = app->add_option("--" + key, flags[key], help);
    }
};

struct Context {
    config::Config cfg;
    std::string section;
    fs::path out_dir;
    std::string hash;

    std::string str(const std::string& k, const std::string& d) const { return cfg.get_string(section, k, d); }
    double num(const std::string& k, double d) const { return cfg.get_double(section, k, d); }
    std::int64_t integer(const std::string& k, std::int64_t d) const { return cfg.get_int(section, k, d); }
    std::uint64_t seed() const { return cfg.get_uint(section, "seed", 1); }
    std::vector<double> list(const std::string& k, const std::vector<double>& d) const
    {
        return cfg.get_doubles(section, k, d);
    }

    std::ofstream open(const std::string& name) const
    {
        std::ofstream f(out_dir / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (out_dir / name).string());
        return f;
    }
    void emit(const std::string& name, const std::string& body, bool comment = true) const
    {
        auto f = open(name);
        if (comment) f << "# config_hash=" << hash << "\n";
        f << body;
        std::cout << (out_dir / name).string() << "\n";
    }
};

std::string csv_of(const std::function<void(std::ostream&)>& w)
{
    std::ostringstream os;
    w(os);
    return os.str();
}

// simulate-bbm: trajectory CSV and optionally the genealogy log.
int simulate_bbm(const Context& c)
{
    engine::SimConfig cfg;
    const auto N = c.integer("N", 1000);
    cfg.params = analytics::derive_params(N, c.num("A", 0.0));
    const std::string init = c.str("init", "stable");
    const auto count = c.integer("count", N);
    if (init == "stable")
        cfg.init = engine::InitialCondition::stable_profile(count);
    else if (init == "point")
        cfg.init = engine::InitialCondition::point_mass(c.num("x", 1.0), count);
    else
        throw config::ConfigError("init must be stable or point");
    const std::string barrier = c.str("barrier", "kill");
    if (barrier == "none")
        cfg.right_barrier = engine::BarrierMode::None;
    else if (barrier == "kill")
        cfg.right_barrier = engine::BarrierMode::KillAt;
    else if (barrier == "record")
        cfg.right_barrier = engine::BarrierMode::RecordHits;
    else
        throw config::ConfigError("barrier must be none, kill or record");
    cfg.horizon = c.num("horizon", 10.0);
    const auto checkpoints = c.integer("checkpoints", 10);
    if (checkpoints < 1) throw config::ConfigError("checkpoints must be positive");
    for (std::int64_t i = 1; i <= checkpoints; ++i) cfg.checkpoint_times.push_back(cfg.horizon * double(i) / double(checkpoints));
    cfg.dt_max = c.num("dt_max", 1.0);
    cfg.max_particles = c.integer("max_particles", 10'000'000);
    cfg.record_genealogy = c.cfg.get_bool(c.section, "genealogy", false);
    cfg.seed = c.seed();
    cfg.threads = static_cast<unsigned>(c.integer("threads", 1));
    try {
        engine::validate(cfg);
    } catch (const std::invalid_argument& e) {
        throw config::ConfigError(e.what());
    }
    const auto r = engine::run(cfg);
    c.emit("trajectory.csv", csv_of([&](std::ostream& o) { engine::write_trajectory_csv(o, r.trajectory); }));
    if (cfg.record_genealogy) c.emit("genealogy.json", engine::genealogy_to_json(r.genealogy), false);
    if (r.aborted) std::cerr << "run aborted at the particle cap\n";
    return kOk;
}

// sample-coalescent: first-event histogram against the exact rates, and
// block-count marginals on the requested times.
int sample_coalescent(const Context& c)
{
    const auto kind = coalescent::parse_kind(c.str("kind", "bsz"));
    const auto n = c.integer("n", 5);
    const auto reps = c.integer("replicates", 10000);
    if (n < 2 || n > 64 || reps < 1) throw config::ConfigError("need 2 <= n <= 64 and replicates >= 1");
    const auto rates = coalescent::merger_rates(static_cast<int>(n), kind);
    double total = 0.0;
    for (double q : rates) total += q;
    std::vector<std::int64_t> hist(rates.size(), 0);
    for (std::int64_t i = 0; i < reps; ++i) {
        rng::Stream s(c.seed(), rng::root_stream(static_cast<std::uint64_t>(i)));
        const auto p = coalescent::sample_path(static_cast<std::size_t>(n), INFINITY, kind, s);
        ++hist[p.events.at(0).k() - 2];
        if (i == 0) c.emit("events.csv", csv_of([&](std::ostream& o) { coalescent::write_events_csv(o, p); }));
    }
    std::string body = "k,count,expected\n";
    for (std::size_t k = 0; k < hist.size(); ++k) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%zu,%lld,%.10g\n", k + 2, static_cast<long long>(hist[k]),
                      double(reps) * rates[k] / total);
        body += buf;
    }
    c.emit("first_event.csv", body);
    const auto times = c.list("times", {});
    if (!times.empty()) {
        const auto m = coalescent::finite_dim_marginal(static_cast<std::size_t>(n), times, kind, reps,
                                                       rng::derive_stream(c.seed(), 1));
        std::string mb = "time,blocks,count\n";
        for (std::size_t t = 0; t < m.times.size(); ++t)
            for (std::size_t b = 1; b < m.block_counts[t].size(); ++b) {
                if (m.block_counts[t][b] == 0) continue;
                mb += config::format_double(m.times[t]) + "," + std::to_string(b) + "," +
                      std::to_string(m.block_counts[t][b]) + "\n";
            }
        c.emit("block_counts.csv", mb);
    }
    return kOk;
}

analytics::CsbpParams csbp_params(const Context& c)
{
    return {c.num("a", 0.0), c.num("b", 2.0 * std::numbers::pi * std::numbers::pi)};
}

int sample_csbp(const Context& c)
{
    const auto times = c.list("times", {0.1, 0.2, 0.3, 0.4, 0.5});
    const auto reps = c.integer("replicates", 1);
    if (reps < 1) throw config::ConfigError("replicates must be positive");
    std::string body = "replicate,t,Z\n";
    for (std::int64_t r = 0; r < reps; ++r) {
        rng::Stream s(c.seed(), rng::root_stream(static_cast<std::uint64_t>(r)));
        const auto traj = csbp::csbp_trajectory(c.num("z0", 1.0), times, csbp_params(c), s);
        std::istringstream rows(csv_of([&](std::ostream& o) { csbp::write_trajectory_csv(o, traj); }));
        std::string line;
        std::getline(rows, line);
        while (std::getline(rows, line)) body += std::to_string(r) + "," + line + "\n";
    }
    c.emit("csbp.csv", body);
    return kOk;
}

int flow_bridges(const Context& c)
{
    const auto params = csbp_params(c);
    const double t = c.num("t", 1.0);
    const auto J = static_cast<std::size_t>(c.integer("jumps", 4096));
    rng::Stream s(c.seed(), 0);
    const auto fb = csbp::bridge_from_flow(c.num("s", 0.5), t, c.num("z0", 1.0), params, s, J);
    c.emit("bridge.csv", csv_of([&](std::ostream& o) { genealogy::write_bridge_csv(o, fb.bridge); }));
    const auto n = c.integer("n", 0);
    if (n > 0) {
        rng::Stream ps(c.seed(), 1);
        const auto fp = csbp::bsz_partitions_from_flow(t, static_cast<std::size_t>(n), c.list("times", {0.5, 1.0}),
                                                       params, c.num("clock_rate", 2.0 * std::numbers::pi), ps, J);
        nlohmann::ordered_json j;
        j["config_hash"] = c.hash;
        j["max_residual"] = fp.max_residual;
        for (std::size_t i = 0; i < fp.times.size(); ++i)
            j["partitions"].push_back({{"s", fp.times[i]},
                                       {"blocks", nlohmann::json::parse(genealogy::partition_to_json(fp.partitions[i]))}});
        c.emit("partitions.json", j.dump(2) + "\n", false);
    }
    return kOk;
}

int estimate_w(const Context& c)
{
    const double y = c.num("y", 6.0);
    const auto ex = fkpp::estimate_w_samples(y, c.integer("replicates", 1000), c.seed(),
                                             static_cast<unsigned>(c.integer("threads", 1)), c.num("horizon", 0.0));
    c.emit("w.csv", csv_of([&](std::ostream& o) { fkpp::write_w_csv(o, ex); }));
    nlohmann::ordered_json j;
    j["config_hash"] = c.hash;
    j["y"] = y;
    j["replicates"] = ex.replicates;
    j["flagged"] = ex.flagged;
    if (ex.w.size() >= 10000) {
        const auto tail = fkpp::tail_analysis(ex.w, c.list("tail_x", {5.0, 10.0, 20.0}));
        j["hill_plateau"] = tail.hill.heavy_tailed ? nlohmann::json(tail.hill.plateau_index) : nlohmann::json();
        for (auto [x, v] : tail.x_tail) j["x_tail"].push_back({x, v});
    }
    c.emit("w_summary.json", j.dump(2) + "\n", false);
    return kOk;
}

int solve_fkpp(const Context& c)
{
    const auto wave = fkpp::solve_fkpp_wave(c.num("X", 20.0), c.num("step", 1e-3));
    c.emit("wave.csv", csv_of([&](std::ostream& o) {
        fkpp::write_wave_csv(o, wave, static_cast<std::size_t>(c.integer("stride", 100)));
    }));
    const auto fit = fkpp::fit_wave_tail(wave, c.num("fit_a", 8.0), c.num("fit_b", 12.0));
    nlohmann::ordered_json j;
    j["config_hash"] = c.hash;
    j["residual"] = fkpp::wave_residual(wave);
    j["C"] = fit.C;
    j["D"] = fit.D;
    c.emit("wave_fit.json", j.dump(2) + "\n", false);
    return kOk;
}

// genealogy-extract: ancestral partitions of a uniform sample and the bridge
// from checkpoint j to the last checkpoint, read from a saved log.
int genealogy_extract(const Context& c)
{
    const std::string input = c.str("input", "");
    if (input.empty()) throw config::ConfigError("genealogy-extract needs --input");
    std::ifstream f(input, std::ios::binary);
    if (!f) throw config::ConfigError("cannot open " + input);
    std::ostringstream ss;
    ss << f.rdbuf();
    const auto log = engine::genealogy_from_json(ss.str());
    if (log.generations.size() < 2) throw config::ConfigError("log needs at least two checkpoints");
    const std::size_t K = log.generations.size() - 1;
    const std::size_t M = log.generations[K].x.size();
    if (M == 0) throw std::runtime_error("population is extinct at the last checkpoint");
    const auto n = c.integer("n", 10);
    if (n < 1) throw config::ConfigError("n must be positive");
    rng::Stream s(c.seed(), 0);
    std::vector<double> u(static_cast<std::size_t>(n));
    std::vector<std::size_t> sample;
    for (auto& v : u) {
        v = s.uniform();
        sample.push_back(genealogy::terminal_sample_index(v, M));
    }
    nlohmann::ordered_json j;
    j["config_hash"] = c.hash;
    j["sample"] = sample;
    for (std::size_t g = 0; g <= K; ++g)
        j["partitions"].push_back(
            {{"time", log.generations[g].time},
             {"blocks", nlohmann::json::parse(genealogy::partition_to_json(
                            genealogy::ancestral_partition_by_index(log, K, sample, g)))}});
    c.emit("partitions.json", j.dump(2) + "\n", false);
    const auto jb = static_cast<std::size_t>(c.integer("from", 0));
    if (jb >= K) throw config::ConfigError("--from must be below the last checkpoint");
    const auto b = genealogy::discrete_bridge(log, jb, K);
    c.emit("bridge.csv", csv_of([&](std::ostream& o) { genealogy::write_bridge_csv(o, b); }));
    return kOk;
}

int verify(const Context& c, const std::string& suite)
{
    acceptance::Options opt;
    opt.seed = c.cfg.get_uint(c.section, "seed", opt.seed);
    opt.threads = static_cast<unsigned>(c.integer("threads", 0));
    opt.effort = c.num("effort", 1.0);
    const auto ids = acceptance::suite_ids(suite);
    const auto outcome = acceptance::run_suite(ids, opt, std::cout);
    c.emit("verify-" + suite + ".json", acceptance::outcome_to_json(outcome, opt) + "\n", false);
    if (outcome.hard_failure) return kHard;
    return outcome.soft_failure ? kSoft : kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Branching Brownian motion with absorption: simulators and acceptance checks"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::string out_dir;
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--out", out_dir, "output directory (default $BBMLAB_OUT or .)");

    std::vector<Command> cmds;
    cmds.reserve(8);
    auto command = [&](const std::string& name, const std::string& help,
                       std::initializer_list<std::pair<const char*, const char*>> keys) -> Command& {
        Command cmd;
        cmd.section = name;
        cmd.app = app.add_subcommand(name, help);
        cmds.push_back(std::move(cmd));
        Command& ref = cmds.back();
        ref.add("seed", "random seed");
        for (auto [k, h] : keys) ref.add(k, h);
        return ref;
    };
    command("simulate-bbm", "simulate the particle system",
            {{"N", "population scale"}, {"A", "killing level offset"}, {"init", "stable or point"},
             {"count", "initial particles"}, {"x", "point-mass position"}, {"barrier", "none, kill or record"},
             {"horizon", "final time"}, {"checkpoints", "number of equally spaced checkpoints"},
             {"dt_max", "largest substep"}, {"max_particles", "abort cap"}, {"genealogy", "write the genealogy log"},
             {"threads", "worker threads"}});
    command("sample-coalescent", "sample Kingman or Bolthausen-Sznitman coalescents",
            {{"kind", "bsz or kingman"}, {"n", "labels"}, {"replicates", "independent paths"},
             {"times", "comma list of observation times"}});
    command("sample-csbp", "sample CSBP trajectories",
            {{"z0", "initial mass"}, {"a", "linear coefficient"}, {"b", "u log u coefficient"},
             {"times", "comma list of times"}, {"replicates", "trajectories"}});
    command("flow-bridges", "bridges and partitions from the subordinator flow",
            {{"s", "start time"}, {"t", "end time"}, {"z0", "initial mass"}, {"a", "linear coefficient"},
             {"b", "u log u coefficient"}, {"jumps", "tracked jumps"}, {"n", "labels for partitions (0: none)"},
             {"times", "coalescent clock values"}, {"clock_rate", "coalescent clock per unit flow time"}});
    command("estimate-w", "sample the barrier-hit count and W",
            {{"y", "barrier depth"}, {"replicates", "samples"}, {"horizon", "time horizon (0: default)"},
             {"threads", "worker threads"}, {"tail_x", "comma list of tail abscissae"}});
    command("solve-fkpp", "solve the travelling wave",
            {{"X", "half width of the domain"}, {"step", "grid step"}, {"stride", "CSV row stride"},
             {"fit_a", "tail fit start"}, {"fit_b", "tail fit end"}});
    command("genealogy-extract", "partitions and bridges from a genealogy log",
            {{"input", "genealogy.json from simulate-bbm"}, {"n", "sample size"}, {"from", "bridge start checkpoint"}});
    Command& ver = command("verify", "run acceptance criteria",
                           {{"threads", "worker threads (0: all cores)"}, {"effort", "replicate multiplier"}});
    std::string suite;
    ver.app->add_option("suite", suite, "identities, engine, coalescent, csbp, genealogy, fkpp, scaling, hard, soft, all or 1-13")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    const Command* chosen = nullptr;
    for (const auto& cmd : cmds)
        if (cmd.app->parsed()) chosen = &cmd;

    Context ctx;
    ctx.section = chosen->section;
    try {
        if (!config_path.empty()) {
            // One file may configure several subcommands; only this one's section is kept.
            const auto file = config::Config::load(config_path);
            for (const auto& [section, keys] : file.sections()) {
                const auto known = std::find_if(cmds.begin(), cmds.end(), [&](const Command& c) { return c.section == section; });
                if (known == cmds.end())
                    throw config::ConfigError(section.empty() ? "keys must sit under a [subcommand] header"
                                                              : "unknown section [" + section + "]");
                for (const auto& [k, v] : keys) {
                    if (!known->options.count(k)) throw config::ConfigError("unknown key " + section + "." + k);
                    if (section == ctx.section) ctx.cfg.set(section, k, v);
                }
            }
        }
        for (const auto& [key, opt] : chosen->options)
            if (opt->count() > 0) ctx.cfg.set(ctx.section, key, chosen->flags.at(key));
        if (ctx.section == "verify") acceptance::suite_ids(suite);
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kUsage;
    }
    if (out_dir.empty()) {
        const char* env = std::getenv("BBMLAB_OUT");
        out_dir = env && *env ? env : ".";
    }
    ctx.out_dir = out_dir;
    ctx.hash = ctx.cfg.hash();

    try {
        fs::create_directories(ctx.out_dir);
        ctx.emit(ctx.section + ".ini", ctx.cfg.canonical(), false);
        const std::string& s = ctx.section;
        if (s == "simulate-bbm") return simulate_bbm(ctx);
        if (s == "sample-coalescent") return sample_coalescent(ctx);
        if (s == "sample-csbp") return sample_csbp(ctx);
        if (s == "flow-bridges") return flow_bridges(ctx);
        if (s == "estimate-w") return estimate_w(ctx);
        if (s == "solve-fkpp") return solve_fkpp(ctx);
        if (s == "genealogy-extract") return genealogy_extract(ctx);
        return verify(ctx, suite);
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid parameter: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
}
