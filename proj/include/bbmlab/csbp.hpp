#pragma once

// The CSBP with mechanism Psi(u) = a u + b u log u through its flow of
// stable subordinators: S^{(s,t)} has Laplace exponent u_{t-s}, which is
// c x lambda^alpha with alpha = e^{-b (t-s)} and c = e^{a (alpha - 1)/b}.
//
// Masses grow like exp(e^{b t}) and leave double range quickly when b is
// large, so trajectories are carried as logarithms.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "bbmlab/analytics.hpp"
#include "bbmlab/genealogy.hpp"
#include "bbmlab/rng.hpp"

namespace bbmlab::csbp {

/// alpha = e^{-b dt}.
double stable_index(double dt, const analytics::CsbpParams& params);

/// Positive stable draw with Laplace transform e^{-lambda^alpha}
/// (Kanter's representation), 0 < alpha < 1.
double sample_positive_stable(double alpha, rng::Stream& stream);
/// Logarithm of the same draw, finite for every alpha in (0, 1].
double log_positive_stable(double alpha, rng::Stream& stream);

/// S^{(0,dt)}(x): E[e^{-lambda out}] = e^{-x u_dt(lambda)}.  dt = 0 returns x.
double sample_S_increment(double dt, double x, const analytics::CsbpParams& params, rng::Stream& stream);
/// Log-space version; log_x = -inf stands for zero mass.
double log_S_increment(double dt, double log_x, const analytics::CsbpParams& params, rng::Stream& stream);

struct Trajectory {
    std::vector<double> times;
    std::vector<double> log_Z;
};

/// Markov composition of increments across the (sorted) times, starting
/// from z0 at time 0.
Trajectory csbp_trajectory(double z0, const std::vector<double>& times, const analytics::CsbpParams& params,
                           rng::Stream& stream);

/// `t,Z`; masses beyond double range are printed in decimal exponent form
/// computed from the logarithm.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

struct FlowBridge {
    genealogy::Bridge bridge;
    std::vector<double> gaps;  ///< tracked normalized jumps, decreasing
    double residual = 0.0;     ///< 1 - sum(gaps), carried as drift
    double alpha = 1.0;
    double log_jump_sum = 0.0; ///< log of sum_i Gamma_i^{-1/alpha}, tail included
    double log_mass_s = 0.0;   ///< log S^{(0,s)}(z0)
    double log_mass_t = 0.0;   ///< log S^{(0,t)}(z0)
    bool coverage_ok = true;   ///< residual <= 1 - min_coverage
};

/// Normalized bridge of a stable(alpha) subordinator on [0, 1]: the J
/// largest jumps (Poisson-Dirichlet(alpha, 0) sizes) at independent
/// uniform locations; the remaining mass becomes a linear drift.
FlowBridge stable_bridge(double alpha, std::size_t J, rng::Stream& stream);

/// B_{s,t}(x) = S^{(s,t)}(x S^{(0,s)}(z0)) / S^{(0,t)}(z0).
FlowBridge bridge_from_flow(double s, double t, double z0, const analytics::CsbpParams& params, rng::Stream& stream,
                            std::size_t J = 4096, double min_coverage = 0.5);

/// Independent PD(alpha, 0) oracle: size-biased stick breaking with
/// Beta(1 - alpha, i alpha) sticks, until the unbroken mass is below `tail`.
std::vector<double> pd_stick_breaking(double alpha, rng::Stream& stream, double tail = 1e-9);
/// Largest PD(alpha, 0) piece by stick breaking (stops once no remaining
/// piece can be larger).
double pd_largest(double alpha, rng::Stream& stream);

struct FlowPartitions {
    std::vector<double> times;  ///< coalescent clock values s
    std::vector<genealogy::Partition> partitions;
    double max_residual = 0.0;
};

/// Pi(s) = pi(B_{t - s/clock_rate, t}) for the given clock values, with
/// shared uniforms U_1..U_n.  Successive bridges are composed, so the
/// partitions form one coalescing path.
FlowPartitions bsz_partitions_from_flow(double t, std::size_t n, const std::vector<double>& times,
                                        const analytics::CsbpParams& params, double clock_rate, rng::Stream& stream,
                                        std::size_t J = 4096);

} // namespace bbmlab::csbp
