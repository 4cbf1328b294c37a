#include "bbmlab/coalescent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "bbmlab/analytics.hpp"
#include "bbmlab/parallel.hpp"

namespace bbmlab::coalescent {

namespace {

constexpr int kExactLimit = 64;

std::vector<double> compute_rates(int b, Kind kind)
{
    std::vector<double> rates(static_cast<std::size_t>(std::max(b - 1, 0)), 0.0);
    if (b < 2) return rates;
    if (kind == Kind::Kingman) {
        rates[0] = 0.5 * b * (b - 1.0);
        return rates;
    }
    for (int k = 2; k <= b; ++k) {
        if (b <= kExactLimit) {
            analytics::Rational binom = 1;
            for (int i = 1; i <= k; ++i) binom = binom * (b - k + i) / i;
            const analytics::Rational r = binom * analytics::lambda_bk_exact(b, k, analytics::LambdaMeasure::Uniform);
            rates[k - 2] = static_cast<double>(r);
        } else {
            const double lchoose = std::lgamma(b + 1.0) - std::lgamma(k + 1.0) - std::lgamma(b - k + 1.0);
            rates[k - 2] = std::exp(lchoose) * analytics::lambda_bk(b, k, analytics::LambdaMeasure::Uniform);
        }
    }
    return rates;
}

const std::vector<double>& cached_rates(int b, Kind kind)
{
    static const auto table = [] {
        std::vector<std::vector<double>> t(2 * (kExactLimit + 1));
        for (int bb = 0; bb <= kExactLimit; ++bb) {
            t[bb] = compute_rates(bb, Kind::Kingman);
            t[kExactLimit + 1 + bb] = compute_rates(bb, Kind::BolthausenSznitman);
        }
        return t;
    }();
    return table[(kind == Kind::Kingman ? 0 : kExactLimit + 1) + b];
}

} // namespace

Kind parse_kind(const std::string& name)
{
    if (name == "kingman") return Kind::Kingman;
    if (name == "bsz" || name == "bolthausen_sznitman" || name == "bolthausen-sznitman") return Kind::BolthausenSznitman;
    throw std::invalid_argument("unknown coalescent kind '" + name + "'");
}

std::string kind_name(Kind kind)
{
    return kind == Kind::Kingman ? "kingman" : "bsz";
}

std::vector<double> merger_rates(int b, Kind kind)
{
    if (b < 0) throw std::invalid_argument("merger_rates: negative block count");
    if (b <= kExactLimit) return cached_rates(b, kind);
    return compute_rates(b, kind);
}

CoalescentPath sample_path(std::size_t n, double horizon, Kind kind, rng::Stream& stream)
{
    if (n == 0) throw std::invalid_argument("sample_path: need n >= 1");
    if (!(horizon >= 0.0)) throw std::invalid_argument("sample_path: horizon must be nonnegative");
    CoalescentPath path;
    path.n = n;
    path.horizon = horizon;
    std::vector<std::uint32_t> idx;
    double t = 0.0;
    std::size_t b = n;
    while (b > 1) {
        const auto local = b > static_cast<std::size_t>(kExactLimit) ? compute_rates(static_cast<int>(b), kind)
                                                                      : std::vector<double>{};
        const auto& rates = local.empty() ? cached_rates(static_cast<int>(b), kind) : local;
        double total = 0.0;
        for (double r : rates) total += r;
        t += stream.exponential() / total;
        if (t > horizon) break;

        double u = stream.uniform() * total;
        std::size_t k = 2;
        for (std::size_t i = 0; i < rates.size(); ++i) {
            k = i + 2;
            if (u < rates[i]) break;
            u -= rates[i];
        }
        while (k > 2 && rates[k - 2] == 0.0) --k;

        // Partial Fisher-Yates: the first k entries form a uniform k-subset.
        idx.resize(b);
        for (std::size_t i = 0; i < b; ++i) idx[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t span = b - i;
            auto j = i + static_cast<std::size_t>(stream.uniform() * static_cast<double>(span));
            if (j >= b) j = b - 1;
            std::swap(idx[i], idx[j]);
        }
        MergeEvent ev;
        ev.time = t;
        ev.blocks.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(ev.blocks.begin(), ev.blocks.end());
        path.events.push_back(std::move(ev));
        b -= k - 1;
    }
    return path;
}

genealogy::Partition CoalescentPath::at(double s) const
{
    // Blocks ordered by smallest element, as the event indices assume.
    std::vector<std::vector<std::uint32_t>> blocks(n);
    for (std::size_t i = 0; i < n; ++i) blocks[i] = {static_cast<std::uint32_t>(i)};
    for (const auto& ev : events) {
        if (ev.time > s) break;
        auto& target = blocks[ev.blocks.front()];
        for (std::size_t i = 1; i < ev.blocks.size(); ++i) {
            const auto& src = blocks[ev.blocks[i]];
            target.insert(target.end(), src.begin(), src.end());
        }
        for (std::size_t i = ev.blocks.size(); i-- > 1;) blocks.erase(blocks.begin() + ev.blocks[i]);
    }
    std::vector<std::uint32_t> labels(n);
    for (std::size_t b = 0; b < blocks.size(); ++b)
        for (auto e : blocks[b]) labels[e] = static_cast<std::uint32_t>(b);
    return genealogy::Partition::from_labels(labels);
}

std::size_t CoalescentPath::block_count(double s) const
{
    std::size_t b = n;
    for (const auto& ev : events) {
        if (ev.time > s) break;
        b -= ev.k() - 1;
    }
    return b;
}

Marginals finite_dim_marginal(std::size_t n, const std::vector<double>& times, Kind kind, std::int64_t replicates,
                              std::uint64_t seed, unsigned threads)
{
    if (n < 2) throw std::invalid_argument("finite_dim_marginal: need n >= 2");
    if (replicates <= 0) throw std::invalid_argument("finite_dim_marginal: need replicates > 0");
    for (double s : times)
        if (!(s >= 0.0)) throw std::invalid_argument("finite_dim_marginal: negative time");
    const double horizon = times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
    const auto R = static_cast<std::size_t>(replicates);
    std::vector<std::uint32_t> counts(R * times.size());
    std::vector<std::uint8_t> pair(R * times.size());
    parallel_for(R, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            rng::Stream stream(seed, rng::root_stream(r));
            const auto path = sample_path(n, horizon, kind, stream);
            for (std::size_t ti = 0; ti < times.size(); ++ti) {
                const auto p = path.at(times[ti]);
                counts[r * times.size() + ti] = static_cast<std::uint32_t>(p.block_count());
                pair[r * times.size() + ti] = p.block(0) == p.block(1);
            }
        }
    });
    Marginals m;
    m.times = times;
    m.replicates = replicates;
    m.block_counts.assign(times.size(), std::vector<std::int64_t>(n + 1, 0));
    m.pair_coalesced.assign(times.size(), 0.0);
    m.pair_se.assign(times.size(), 0.0);
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::int64_t hits = 0;
        for (std::size_t r = 0; r < R; ++r) {
            ++m.block_counts[ti][counts[r * times.size() + ti]];
            hits += pair[r * times.size() + ti];
        }
        const double p = static_cast<double>(hits) / static_cast<double>(R);
        m.pair_coalesced[ti] = p;
        m.pair_se[ti] = std::sqrt(std::max(p * (1 - p), 1.0 / static_cast<double>(R)) / static_cast<double>(R));
    }
    return m;
}

void write_events_csv(std::ostream& out, const CoalescentPath& path)
{
    out << "time,k,block_ids\n";
    char buf[64];
    for (const auto& ev : path.events) {
        std::snprintf(buf, sizeof buf, "%.17g,%zu", ev.time, ev.k());
        out << buf;
        for (auto b : ev.blocks) out << ',' << b;
        out << '\n';
    }
}

} // namespace bbmlab::coalescent
