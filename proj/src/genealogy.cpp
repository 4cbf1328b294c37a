#include "bbmlab/genealogy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace bbmlab::genealogy {

namespace {

constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

const engine::Generation& generation(const engine::GenealogyLog& log, std::size_t j)
{
    if (j >= log.generations.size()) throw std::out_of_range("genealogy: generation index out of range");
    return log.generations[j];
}

std::size_t generation_at(const engine::GenealogyLog& log, double t)
{
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    for (std::size_t i = 0; i < log.generations.size(); ++i)
        if (std::abs(log.generations[i].time - t) <= tol) return i;
    throw std::invalid_argument("genealogy: no checkpoint at time " + std::to_string(t));
}

} // namespace

Partition Partition::singletons(std::size_t n)
{
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i;
    return from_labels(labels);
}

std::vector<std::vector<std::uint32_t>> Partition::blocks() const
{
    std::vector<std::vector<std::uint32_t>> out(blocks_);
    for (std::size_t i = 0; i < block_of_.size(); ++i) out[block_of_[i]].push_back(static_cast<std::uint32_t>(i));
    return out;
}

std::vector<std::size_t> Partition::block_sizes() const
{
    std::vector<std::size_t> out(blocks_, 0);
    for (auto b : block_of_) ++out[b];
    return out;
}

bool Partition::refines(const Partition& coarser) const
{
    if (coarser.size() != size()) throw std::invalid_argument("Partition::refines: size mismatch");
    std::vector<std::int64_t> image(blocks_, -1);
    for (std::size_t i = 0; i < size(); ++i) {
        auto& img = image[block_of_[i]];
        if (img < 0)
            img = coarser.block_of_[i];
        else if (img != coarser.block_of_[i])
            return false;
    }
    return true;
}

Partition Partition::restrict_to(const std::vector<std::size_t>& elements) const
{
    std::vector<std::uint32_t> labels;
    labels.reserve(elements.size());
    for (auto e : elements) {
        if (e >= size()) throw std::out_of_range("Partition::restrict_to: element out of range");
        labels.push_back(block_of_[e]);
    }
    return from_labels(labels);
}

Bridge Bridge::identity()
{
    Bridge b;
    b.drift = 1.0;
    return b;
}

double Bridge::operator()(double s) const
{
    if (s < 0.0) return 0.0;
    s = std::min(s, 1.0);
    const auto it = std::upper_bound(x.begin(), x.end(), s);
    if (it == x.begin()) return drift * s;
    const auto j = static_cast<std::size_t>(it - x.begin()) - 1;
    return drift == 0.0 ? value[j] : value[j] + drift * (s - x[j]);
}

double Bridge::inverse(double u) const
{
    if (u <= 0.0) return 0.0;
    const bool exact = !value_count.empty();
    auto reaches = [&](std::size_t j) {
        if (exact) return std::fma(-u, value_denominator, value_count[j]) >= 0.0;
        return value[j] >= u;
    };
    std::size_t lo = 0;
    std::size_t hi = x.size();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (reaches(mid))
            hi = mid;
        else
            lo = mid + 1;
    }
    const std::size_t j = lo;
    if (drift == 0.0) return j < x.size() ? x[j] : 1.0;
    const double base = j == 0 ? 0.0 : value[j - 1];
    const double start = j == 0 ? 0.0 : x[j - 1];
    if (j == x.size()) return std::min(1.0, start + (u - base) / drift);
    const double left = base + drift * (x[j] - start);
    if (u <= left) return start + (u - base) / drift;
    return x[j];
}

std::vector<double> Bridge::jumps() const
{
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double before = j == 0 ? drift * x[j] : value[j - 1] + drift * (x[j] - x[j - 1]);
        out[j] = value[j] - before;
    }
    return out;
}

void Bridge::check() const
{
    if (x.size() != value.size()) throw std::logic_error("bridge: x and value sizes differ");
    if (!value_count.empty() && value_count.size() != x.size()) throw std::logic_error("bridge: count size mismatch");
    if (!(drift >= 0.0)) throw std::logic_error("bridge: negative drift");
    double prev_x = -1.0;
    double prev_v = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!(x[j] > prev_x) || x[j] < 0.0 || x[j] > 1.0) throw std::logic_error("bridge: breakpoints not increasing in [0,1]");
        if (value[j] < prev_v || value[j] > 1.0) throw std::logic_error("bridge: values not nondecreasing in [0,1]");
        prev_x = x[j];
        prev_v = value[j];
    }
    const double end = (*this)(1.0);
    if (std::abs(end - 1.0) > 1e-12) throw std::logic_error("bridge: B(1) != 1");
    if (residual < 0.0 || residual > 1.0) throw std::logic_error("bridge: residual outside [0,1]");
}

double bridge_inverse(const Bridge& b, double u)
{
    return b.inverse(u);
}

Partition partition_from_bridge(const Bridge& b, const std::vector<double>& uniforms)
{
    std::vector<double> labels;
    labels.reserve(uniforms.size());
    for (double u : uniforms) labels.push_back(b.inverse(u));
    return Partition::from_labels(labels);
}

std::vector<double> assign_weights(const engine::GenealogyLog& log, std::size_t j, bool terminal)
{
    const auto& g = generation(log, j);
    const std::size_t M = g.x.size();
    if (M == 0) throw std::domain_error("assign_weights: empty generation");
    std::vector<double> w(M);
    if (terminal) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(M));
        return w;
    }
    double Z = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const double x = g.x[i];
        w[i] = x <= log.z_level ? std::exp(log.mu * x) * std::sin(std::numbers::pi * x / log.z_level) : 0.0;
        w[i] = std::max(w[i], 0.0);
        Z += w[i];
    }
    if (!(Z > 0.0)) throw std::domain_error("assign_weights: Z is zero at a non-terminal checkpoint");
    for (auto& v : w) v /= Z;
    return w;
}

Cumulative cumulative_weights(const engine::GenealogyLog& log, std::size_t j, bool terminal)
{
    const auto& g = generation(log, j);
    const std::size_t M = g.x.size();
    if (M == 0) throw std::domain_error("cumulative_weights: empty generation");
    Cumulative out;
    out.terminal = terminal;
    out.c.resize(M + 1);
    out.c[0] = 0.0;
    if (terminal) {
        for (std::size_t I = 1; I <= M; ++I) out.c[I] = static_cast<double>(I) / static_cast<double>(M);
    } else {
        std::vector<double> prefix(M + 1, 0.0);
        for (std::size_t i = 0; i < M; ++i) {
            const double x = g.x[i];
            double w = x <= log.z_level ? std::exp(log.mu * x) * std::sin(std::numbers::pi * x / log.z_level) : 0.0;
            prefix[i + 1] = prefix[i] + std::max(w, 0.0);
        }
        const double total = prefix[M];
        if (!(total > 0.0)) throw std::domain_error("cumulative_weights: Z is zero at a non-terminal checkpoint");
        for (std::size_t I = 1; I <= M; ++I) out.c[I] = prefix[I] / total;
    }
    for (std::size_t I = 1; I <= M; ++I)
        if (!(out.c[I] > out.c[I - 1])) out.strictly_increasing = false;
    return out;
}

std::size_t quantile_index(double y, const std::vector<double>& weights)
{
    double sum = 0.0;
    std::size_t I = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        sum += weights[i];
        if (sum <= y)
            I = i + 1;
        else
            break;
    }
    return I;
}

std::vector<std::uint32_t> ancestors(const engine::GenealogyLog& log, std::size_t j, std::size_t k)
{
    if (j > k) throw std::invalid_argument("ancestors: need j <= k");
    const auto& gk = generation(log, k);
    std::vector<std::uint32_t> a(gk.x.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<std::uint32_t>(i);
    for (std::size_t g = k; g > j; --g) {
        const auto& gen = generation(log, g);
        const auto prev_size = generation(log, g - 1).x.size();
        for (auto& v : a) {
            const auto p = gen.parent[v];
            if (p == kNoParent || p >= prev_size) throw std::logic_error("ancestors: broken parent pointer");
            v = p;
        }
    }
    return a;
}

std::vector<std::size_t> descendant_prefix(const engine::GenealogyLog& log, std::size_t j, std::size_t k)
{
    const auto a = ancestors(log, j, k);
    const std::size_t Mj = generation(log, j).x.size();
    std::vector<std::size_t> D(Mj + 1, 0);
    for (auto v : a) ++D[v + 1];
    for (std::size_t I = 1; I <= Mj; ++I) D[I] += D[I - 1];
    return D;
}

Bridge discrete_bridge(const engine::GenealogyLog& log, std::size_t j, std::size_t k)
{
    if (!(j < k)) throw std::invalid_argument("discrete_bridge: need j < k");
    const bool terminal = k + 1 == log.generations.size();
    const auto cj = cumulative_weights(log, j, false);
    const auto ck = cumulative_weights(log, k, terminal);
    const auto D = descendant_prefix(log, j, k);
    const std::size_t Mj = cj.c.size() - 1;
    const auto Mk = static_cast<double>(ck.c.size() - 1);

    Bridge b;
    for (std::size_t I = 1; I <= Mj; ++I) {
        const double xv = cj.c[I];
        const double v = ck.c[D[I]];
        // Equal cumulative weights: B takes the value at the largest index.
        if (!b.x.empty() && b.x.back() == xv) {
            b.value.back() = v;
            if (terminal) b.value_count.back() = static_cast<double>(D[I]);
            continue;
        }
        b.x.push_back(xv);
        b.value.push_back(v);
        if (terminal) b.value_count.push_back(static_cast<double>(D[I]));
    }
    if (terminal) b.value_denominator = Mk;
    return b;
}

Partition ancestral_partition_by_index(const engine::GenealogyLog& log, std::size_t k,
                                       const std::vector<std::size_t>& sample, std::size_t j)
{
    const auto a = ancestors(log, j, k);
    std::vector<std::uint32_t> labels;
    labels.reserve(sample.size());
    for (auto i : sample) {
        if (i >= a.size()) throw std::invalid_argument("ancestral_partition: sample index out of range");
        labels.push_back(a[i]);
    }
    return Partition::from_labels(labels);
}

Partition ancestral_partition(const engine::GenealogyLog& log, double T, const std::vector<std::uint64_t>& sample_ids,
                              double s_back)
{
    if (s_back < 0.0) throw std::invalid_argument("ancestral_partition: s_back must be nonnegative");
    const std::size_t k = generation_at(log, T);
    const std::size_t j = generation_at(log, log.generations[k].time - s_back);
    const auto& gk = log.generations[k];
    std::unordered_map<std::uint64_t, std::size_t> index;
    for (std::size_t i = 0; i < gk.id.size(); ++i) index.emplace(gk.id[i], i);
    std::vector<std::size_t> sample;
    sample.reserve(sample_ids.size());
    for (auto id : sample_ids) {
        const auto it = index.find(id);
        if (it == index.end()) throw std::invalid_argument("ancestral_partition: particle not alive at T");
        sample.push_back(it->second);
    }
    return ancestral_partition_by_index(log, k, sample, j);
}

std::size_t terminal_sample_index(double u, std::size_t M)
{
    if (!(u > 0.0 && u <= 1.0) || M == 0) throw std::invalid_argument("terminal_sample_index: need u in (0,1], M > 0");
    const auto m = static_cast<double>(M);
    double c = std::ceil(u * m);
    // Smallest integer c with c >= u M, decided by exact residuals.
    while (std::fma(u, m, -c) > 0.0) c += 1.0;
    while (c > 1.0 && std::fma(u, m, -(c - 1.0)) <= 0.0) c -= 1.0;
    c = std::clamp(c, 1.0, m);
    return static_cast<std::size_t>(c) - 1;
}

std::string partition_to_json(const Partition& p)
{
    std::string out = "[";
    const auto blocks = p.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (b) out += ",";
        out += "[";
        for (std::size_t i = 0; i < blocks[b].size(); ++i) {
            if (i) out += ",";
            out += std::to_string(blocks[b][i]);
        }
        out += "]";
    }
    out += "]";
    return out;
}

void write_bridge_csv(std::ostream& out, const Bridge& b)
{
    if (b.drift > 0.0) {
        char head[64];
        std::snprintf(head, sizeof head, "# drift=%.17g\n", b.drift);
        out << head;
    }
    out << "x,value\n";
    char buf[96];
    for (std::size_t j = 0; j < b.x.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", b.x[j], b.value[j]);
        out << buf;
    }
}

} // namespace bbmlab::genealogy
