#pragma once

// Critical branching Brownian motion (drift -sqrt 2) killed at -y, the
// limit variable W = lim y e^{-sqrt2 y} Z_y, and the travelling wave
//   psi''/2 - sqrt2 psi' = psi (1 - psi),   psi(-inf) = 1, psi(+inf) = 0.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "bbmlab/rng.hpp"
#include "bbmlab/stats.hpp"

namespace bbmlab::fkpp {

struct ZySample {
    std::int64_t count = 0;  ///< hits before the horizon
    bool flagged = false;    ///< a particle was still alive at the horizon
};

/// Number of particles reaching -y, for one particle started at 0.
/// Each lifetime is an exponential clock; whether the level is reached
/// inside it is decided exactly from the Gaussian endpoint and the
/// Brownian-bridge crossing probability.  `horizon` <= 0 means
/// 10 max(y^2, 1).  Particles alive at the horizon are dropped and the
/// sample flagged; `count` then holds the hits before the horizon.
ZySample simulate_Zy(double y, rng::Stream& stream, double horizon = 0.0);

struct WExperiment {
    double y = 0.0;
    double horizon = 0.0;
    std::vector<std::int64_t> zy;  ///< unflagged replicates, replicate order
    std::vector<double> w;         ///< y e^{-sqrt2 y} Z_y
    std::int64_t flagged = 0;
    std::int64_t replicates = 0;
};

/// Replicate r uses root stream r of `seed`; results do not depend on the
/// thread count.
WExperiment estimate_w_samples(double y, std::int64_t replicates, std::uint64_t seed, unsigned threads = 1,
                               double horizon = 0.0);

struct TailReport {
    stats::HillSweep hill;
    std::vector<std::pair<double, double>> x_tail;  ///< (x, x P(W > x))
};

/// Hill sweep over k in [n/200, n/20] and x P(W > x) on `xs`.  Needs at
/// least 10^4 samples.
TailReport tail_analysis(const std::vector<double>& w, const std::vector<double>& xs);

struct WaveSolution {
    double h = 0.0;
    std::vector<double> u;
    std::vector<double> psi;
    std::vector<double> dpsi;
    /// Evaluates psi by cubic Hermite interpolation; constant beyond the grid.
    double operator()(double x) const;
};

/// Integrates the wave equation backwards from its decaying tail on
/// [-X, X] with RK4 and step h, translated so psi(0) = 1/2.
WaveSolution solve_fkpp_wave(double X = 20.0, double h = 1e-3);

/// max |psi''/2 - sqrt2 psi' - psi(1 - psi)| over interior grid points,
/// derivatives by sixth-order central differences.
double wave_residual(const WaveSolution& wave);

struct TailFit {
    double C = 0.0;
    double D = 0.0;
};
/// Least-squares fit of 1 - w(x) = (C x + D) e^{-sqrt2 x}, w(x) = psi(-x),
/// on grid points in [a, b].
TailFit fit_wave_tail(const WaveSolution& wave, double a, double b);

struct LaplacePoint {
    double u = 0.0;
    double mc = 0.0;
    double se = 0.0;
    double psi = 0.0;  ///< psi(u + shift)
};
struct LaplaceReport {
    double shift = 0.0;
    std::vector<LaplacePoint> points;
};

/// Mean of exp(-e^{sqrt2 u} w) against psi(u + shift); the single shift is
/// chosen in [-max_shift, max_shift] to minimise the standardised squared
/// differences.  Pass max_shift = 0 for the unshifted comparison.
LaplaceReport laplace_cross_check(const WaveSolution& wave, const std::vector<double>& w,
                                  const std::vector<double>& u_grid, double max_shift = 2.0);

void write_wave_csv(std::ostream& out, const WaveSolution& wave, std::size_t stride = 100);
void write_w_csv(std::ostream& out, const WExperiment& ex);

} // namespace bbmlab::fkpp
