#include "bbmlab/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bbmlab::stats {

MeanSe mean_se(std::span<const double> xs)
{
    MeanSe out;
    out.n = xs.size();
    if (xs.empty()) return out;
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (double x : xs) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    out.mean = mean;
    out.se = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    return out;
}

double kolmogorov_q(double lambda)
{
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double stephens_lambda(double n_eff, double d)
{
    const double sn = std::sqrt(n_eff);
    return (sn + 0.12 + 0.11 / sn) * d;
}

} // namespace

StatReport ks_test(std::span<const double> samples, const std::function<double(double)>& cdf, double level)
{
    if (samples.size() < 2) throw std::invalid_argument("ks_test: need at least two samples");
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    StatReport r;
    r.name = "ks";
    r.statistic = d;
    r.p_value = kolmogorov_q(stephens_lambda(n, d));
    r.level = level;
    r.passed = r.p_value >= level;
    r.samples = xs.size();
    return r;
}

StatReport ks_two_sample(std::span<const double> a, std::span<const double> b, double level)
{
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("ks_two_sample: need at least two samples each");
    std::vector<double> xa(a.begin(), a.end());
    std::vector<double> xb(b.begin(), b.end());
    std::sort(xa.begin(), xa.end());
    std::sort(xb.begin(), xb.end());
    const double na = static_cast<double>(xa.size());
    const double nb = static_cast<double>(xb.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < xa.size() && j < xb.size()) {
        const double v = std::min(xa[i], xb[j]);
        while (i < xa.size() && xa[i] == v) ++i;
        while (j < xb.size() && xb[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    StatReport r;
    r.name = "ks2";
    r.statistic = d;
    r.p_value = kolmogorov_q(stephens_lambda(na * nb / (na + nb), d));
    r.level = level;
    r.passed = r.p_value >= level;
    r.samples = xa.size() + xb.size();
    return r;
}

StatReport chi_square(std::span<const double> counts, std::span<const double> expected, double level)
{
    if (counts.size() != expected.size() || counts.size() < 2)
        throw std::invalid_argument("chi_square: need matching bins, at least two");
    double stat = 0.0;
    int dof = -1;
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        total += counts[i];
        if (expected[i] < 0.0) throw std::invalid_argument("chi_square: negative expectation");
        if (expected[i] == 0.0) {
            if (counts[i] != 0.0) throw std::invalid_argument("chi_square: count in a bin with zero expectation");
            continue;
        }
        const double diff = counts[i] - expected[i];
        stat += diff * diff / expected[i];
        ++dof;
    }
    if (dof < 1) throw std::invalid_argument("chi_square: need at least two non-empty bins");
    StatReport r;
    r.name = "chi_square";
    r.statistic = stat;
    r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
    r.level = level;
    r.passed = r.p_value >= level;
    r.samples = static_cast<std::size_t>(total);
    r.values["dof"] = dof;
    return r;
}

double hill(std::span<const double> samples, std::size_t k)
{
    if (k < 1 || k >= samples.size()) throw std::invalid_argument("hill: need 1 <= k < n");
    std::vector<double> xs(samples.begin(), samples.end());
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k), xs.end(), std::greater<>());
    const double threshold = xs[k];
    if (!(threshold > 0.0)) throw std::invalid_argument("hill: (k+1)-th largest sample must be positive");
    double h = 0.0;
    for (std::size_t i = 0; i < k; ++i) h += std::log(xs[i] / threshold);
    h /= static_cast<double>(k);
    return 1.0 / h;
}

HillSweep hill_sweep(std::span<const double> samples, std::size_t grid_points)
{
    const std::size_t n = samples.size();
    if (n < 200 * 5) throw std::invalid_argument("hill_sweep: need at least 1000 samples");
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end(), std::greater<>());
    std::vector<double> logs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) logs[i] = xs[i] > 0.0 ? std::log(xs[i]) : -INFINITY;

    HillSweep out;
    const double kmin = static_cast<double>(n) / 200.0;
    const double kmax = static_cast<double>(n) / 20.0;
    std::size_t last_k = 0;
    for (std::size_t g = 0; g < grid_points; ++g) {
        const double frac = grid_points > 1 ? static_cast<double>(g) / static_cast<double>(grid_points - 1) : 0.0;
        const auto k = static_cast<std::size_t>(std::llround(kmin * std::pow(kmax / kmin, frac)));
        if (k == last_k || k < 1 || k >= n) continue;
        last_k = k;
        if (!(xs[k] > 0.0)) break;
        double h = 0.0;
        for (std::size_t i = 0; i < k; ++i) h += logs[i] - logs[k];
        out.points.push_back({k, static_cast<double>(k) / h});
    }

    // Longest window with relative half-range <= 5% spanning k ratio >= 3.
    std::size_t best_len = 0;
    for (std::size_t b = 0; b < out.points.size(); ++b) {
        double lo = out.points[b].index;
        double hi = lo;
        for (std::size_t e = b + 1; e <= out.points.size(); ++e) {
            lo = std::min(lo, out.points[e - 1].index);
            hi = std::max(hi, out.points[e - 1].index);
            const double mid = 0.5 * (lo + hi);
            if (hi - lo > 0.1 * mid) break;
            const double span = static_cast<double>(out.points[e - 1].k) / static_cast<double>(out.points[b].k);
            if (span >= 3.0 && e - b > best_len) {
                best_len = e - b;
                out.plateau_begin = b;
                out.plateau_end = e;
            }
        }
    }
    out.heavy_tailed = best_len > 0;
    if (out.heavy_tailed) {
        std::vector<double> idx;
        for (std::size_t i = out.plateau_begin; i < out.plateau_end; ++i) idx.push_back(out.points[i].index);
        out.plateau_index = median(idx);
    }
    return out;
}

std::pair<double, double> bootstrap_ci(const std::function<double(std::span<const double>)>& statistic,
                                       std::span<const double> samples, double level, rng::Stream& stream,
                                       std::size_t resamples)
{
    if (samples.size() < 2) throw std::invalid_argument("bootstrap_ci: need at least two samples");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_ci: level must be in (0, 1)");
    std::vector<double> stats;
    stats.reserve(resamples);
    std::vector<double> buffer(samples.size());
    const auto n = samples.size();
    for (std::size_t r = 0; r < resamples; ++r) {
        for (auto& b : buffer) b = samples[static_cast<std::size_t>(stream.uniform() * static_cast<double>(n)) % n];
        stats.push_back(statistic(buffer));
    }
    std::sort(stats.begin(), stats.end());
    const double alpha = 0.5 * (1.0 - level);
    auto at = [&](double q) {
        const auto i = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1)));
        return stats[std::min(i, resamples - 1)];
    };
    return {at(alpha), at(1.0 - alpha)};
}

std::vector<std::pair<double, double>> tail_product(std::span<const double> samples, std::span<const double> xs)
{
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    std::vector<std::pair<double, double>> out;
    for (double x : xs) {
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
        out.emplace_back(x, x * static_cast<double>(above) / n);
    }
    return out;
}

double median(std::vector<double> xs)
{
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
    double m = xs[mid];
    if (xs.size() % 2 == 0) {
        const double lower = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lower);
    }
    return m;
}

} // namespace bbmlab::stats
