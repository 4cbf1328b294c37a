#include "bbmlab/fkpp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "bbmlab/parallel.hpp"

namespace bbmlab::fkpp {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr std::int64_t kMaxEvents = 2'000'000'000;

struct Pending {
    double x;
    double t;
};

double default_horizon(double y)
{
    return 10.0 * std::max(y * y, 1.0);
}

} // namespace

ZySample simulate_Zy(double y, rng::Stream& stream, double horizon)
{
    if (!(y > 0.0)) throw std::invalid_argument("simulate_Zy: need y > 0");
    if (horizon <= 0.0) horizon = default_horizon(y);
    // Shifted frame: start at y, absorbed at 0.
    ZySample out;
    std::vector<Pending> stack{{y, 0.0}};
    std::int64_t events = 0;
    while (!stack.empty()) {
        const Pending p = stack.back();
        stack.pop_back();
        const double life = stream.exponential();
        const double h = std::min(life, horizon - p.t);
        const double end = p.x - kSqrt2 * h + std::sqrt(h) * stream.normal();
        bool hit = end <= 0.0;
        if (!hit) hit = stream.uniform() < std::exp(-2.0 * p.x * end / h);
        if (hit) {
            ++out.count;
            continue;
        }
        if (++events > kMaxEvents) {
            out.flagged = true;
            return out;
        }
        if (h < life) {
            out.flagged = true;
            continue;
        }
        stack.push_back({end, p.t + h});
        stack.push_back({end, p.t + h});
    }
    return out;
}

WExperiment estimate_w_samples(double y, std::int64_t replicates, std::uint64_t seed, unsigned threads,
                               double horizon)
{
    if (!(y > 0.0)) throw std::invalid_argument("estimate_w_samples: need y > 0");
    if (replicates <= 0) throw std::invalid_argument("estimate_w_samples: need replicates > 0");
    if (horizon <= 0.0) horizon = default_horizon(y);
    const auto R = static_cast<std::size_t>(replicates);
    std::vector<ZySample> samples(R);
    parallel_for(R, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            rng::Stream stream(seed, rng::root_stream(r));
            samples[r] = simulate_Zy(y, stream, horizon);
        }
    });
    WExperiment ex;
    ex.y = y;
    ex.horizon = horizon;
    ex.replicates = replicates;
    const double scale = y * std::exp(-kSqrt2 * y);
    for (const auto& s : samples) {
        if (s.flagged) {
            ++ex.flagged;
            continue;
        }
        ex.zy.push_back(s.count);
        ex.w.push_back(scale * static_cast<double>(s.count));
    }
    return ex;
}

TailReport tail_analysis(const std::vector<double>& w, const std::vector<double>& xs)
{
    if (w.size() < 10000) throw std::invalid_argument("tail_analysis: need at least 10^4 samples");
    TailReport r;
    r.hill = stats::hill_sweep(w);
    r.x_tail = stats::tail_product(w, xs);
    return r;
}

namespace {

constexpr double kLambdaPlus = kSqrt2 - 2.0;  // decay rate of psi as u -> +inf

std::array<double, 2> rhs(double psi, double dpsi)
{
    return {dpsi, 2.0 * kSqrt2 * dpsi + 2.0 * psi * (1.0 - psi)};
}

// Integrates from u_top down to -X with step h; fills grid values for
// u in [-X, X].  The start lies on the linearised decaying branch.
void integrate(double log_eps, double h, std::size_t n_grid, std::size_t top_steps, WaveSolution& out)
{
    double psi = std::exp(log_eps);
    double dpsi = kLambdaPlus * psi;
    // Grid index of the current point: n_grid - 1 + top_steps at the start.
    std::size_t idx = n_grid - 1 + top_steps;
    out.psi.assign(n_grid, 0.0);
    out.dpsi.assign(n_grid, 0.0);
    while (true) {
        if (idx < n_grid) {
            out.psi[idx] = psi;
            out.dpsi[idx] = dpsi;
        }
        if (idx == 0) break;
        const double k = -h;
        const auto a = rhs(psi, dpsi);
        const auto b = rhs(psi + 0.5 * k * a[0], dpsi + 0.5 * k * a[1]);
        const auto c = rhs(psi + 0.5 * k * b[0], dpsi + 0.5 * k * b[1]);
        const auto d = rhs(psi + k * c[0], dpsi + k * c[1]);
        psi += k / 6.0 * (a[0] + 2 * b[0] + 2 * c[0] + d[0]);
        dpsi += k / 6.0 * (a[1] + 2 * b[1] + 2 * c[1] + d[1]);
        --idx;
    }
}

} // namespace

double WaveSolution::operator()(double x) const
{
    if (u.empty()) throw std::logic_error("WaveSolution: empty");
    if (x <= u.front()) return psi.front();
    if (x >= u.back()) return psi.back();
    auto i = static_cast<std::size_t>((x - u.front()) / h);
    i = std::min(i, u.size() - 2);
    const double s = (x - u[i]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    return h00 * psi[i] + h10 * h * dpsi[i] + h01 * psi[i + 1] + h11 * h * dpsi[i + 1];
}

WaveSolution solve_fkpp_wave(double X, double h)
{
    if (!(X >= 15.0)) throw std::invalid_argument("solve_fkpp_wave: need X >= 15");
    if (!(h > 0.0 && h <= 0.05)) throw std::invalid_argument("solve_fkpp_wave: need 0 < h <= 0.05");
    const auto half = static_cast<std::size_t>(std::llround(X / h));
    const std::size_t n_grid = 2 * half + 1;
    const auto top_steps = static_cast<std::size_t>(std::llround(30.0 / h));
    WaveSolution w;
    w.h = h;
    w.u.resize(n_grid);
    for (std::size_t i = 0; i < n_grid; ++i)
        w.u[i] = (static_cast<double>(i) - static_cast<double>(half)) * h;

    // psi(0) increases with the starting amplitude; bisect on its logarithm.
    double lo = -80.0;
    double hi = -1.0;
    integrate(lo, h, n_grid, top_steps, w);
    const double f_lo = w.psi[half] - 0.5;
    integrate(hi, h, n_grid, top_steps, w);
    const double f_hi = w.psi[half] - 0.5;
    if (!(f_lo < 0.0 && f_hi > 0.0))
        throw std::runtime_error("solve_fkpp_wave: anchor not bracketed (psi(0) - 1/2 = " + std::to_string(f_lo) +
                                 ", " + std::to_string(f_hi) + ")");
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::abs(lo); ++it) {
        const double mid = 0.5 * (lo + hi);
        integrate(mid, h, n_grid, top_steps, w);
        if (w.psi[half] < 0.5)
            lo = mid;
        else
            hi = mid;
    }
    integrate(0.5 * (lo + hi), h, n_grid, top_steps, w);
    return w;
}

double wave_residual(const WaveSolution& wave)
{
    const auto& f = wave.psi;
    const double h = wave.h;
    double worst = 0.0;
    for (std::size_t i = 3; i + 3 < f.size(); ++i) {
        const double d2 = (2 * f[i - 3] - 27 * f[i - 2] + 270 * f[i - 1] - 490 * f[i] + 270 * f[i + 1] -
                           27 * f[i + 2] + 2 * f[i + 3]) /
                          (180 * h * h);
        const double d1 = (-f[i - 3] + 9 * f[i - 2] - 45 * f[i - 1] + 45 * f[i + 1] - 9 * f[i + 2] + f[i + 3]) / (60 * h);
        worst = std::max(worst, std::abs(0.5 * d2 - kSqrt2 * d1 - f[i] * (1 - f[i])));
    }
    return worst;
}

TailFit fit_wave_tail(const WaveSolution& wave, double a, double b)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < wave.u.size(); ++i) {
        const double x = -wave.u[i];
        if (x < a || x > b) continue;
        const double yv = (1.0 - wave.psi[i]) * std::exp(kSqrt2 * x);
        sx += x;
        sy += yv;
        sxx += x * x;
        sxy += x * yv;
        ++n;
    }
    if (n < 3) throw std::invalid_argument("fit_wave_tail: interval outside the grid");
    const double dn = static_cast<double>(n);
    TailFit fit;
    fit.C = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
    fit.D = (sy - fit.C * sx) / dn;
    return fit;
}

LaplaceReport laplace_cross_check(const WaveSolution& wave, const std::vector<double>& w,
                                  const std::vector<double>& u_grid, double max_shift)
{
    if (w.empty()) throw std::invalid_argument("laplace_cross_check: no samples");
    LaplaceReport rep;
    for (double u : u_grid) {
        std::vector<double> v;
        v.reserve(w.size());
        const double lambda = std::exp(kSqrt2 * u);
        for (double x : w) v.push_back(std::exp(-lambda * x));
        const auto m = stats::mean_se(v);
        rep.points.push_back({u, m.mean, m.se, 0.0});
    }
    auto loss = [&](double shift) {
        double s = 0.0;
        for (const auto& p : rep.points) {
            const double z = (p.mc - wave(p.u + shift)) / std::max(p.se, 1e-6);
            s += z * z;
        }
        return s;
    };
    double shift = 0.0;
    if (max_shift > 0.0) {
        // Coarse scan, then golden-section refinement around the best cell.
        const int cells = 200;
        double best = -max_shift;
        double best_loss = loss(best);
        for (int i = 1; i <= cells; ++i) {
            const double s = -max_shift + 2.0 * max_shift * i / cells;
            const double l = loss(s);
            if (l < best_loss) {
                best_loss = l;
                best = s;
            }
        }
        const double cell = 2.0 * max_shift / cells;
        double a = std::max(-max_shift, best - cell);
        double b = std::min(max_shift, best + cell);
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        double c = b - g * (b - a);
        double d = a + g * (b - a);
        for (int it = 0; it < 100; ++it) {
            if (loss(c) < loss(d))
                b = d;
            else
                a = c;
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        shift = 0.5 * (a + b);
    }
    rep.shift = shift;
    for (auto& p : rep.points) p.psi = wave(p.u + shift);
    return rep;
}

void write_wave_csv(std::ostream& out, const WaveSolution& wave, std::size_t stride)
{
    if (stride == 0) stride = 1;
    out << "x,psi\n";
    char buf[80];
    for (std::size_t i = 0; i < wave.u.size(); i += stride) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", wave.u[i], wave.psi[i]);
        out << buf;
    }
}

void write_w_csv(std::ostream& out, const WExperiment& ex)
{
    out << "replicate,zy,w\n";
    char buf[96];
    for (std::size_t i = 0; i < ex.w.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%lld,%.17g\n", i, static_cast<long long>(ex.zy[i]), ex.w[i]);
        out << buf;
    }
}

} // namespace bbmlab::fkpp
