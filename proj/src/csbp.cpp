#include "bbmlab/csbp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace bbmlab::csbp {

namespace {

constexpr double kPi = std::numbers::pi;

void check_params(const analytics::CsbpParams& p)
{
    if (!(p.b > 0.0) || !std::isfinite(p.b) || !std::isfinite(p.a))
        throw std::invalid_argument("csbp: need finite a and b > 0");
}

} // namespace

double stable_index(double dt, const analytics::CsbpParams& params)
{
    check_params(params);
    if (!(dt >= 0.0)) throw std::invalid_argument("csbp: dt must be nonnegative");
    return std::exp(-params.b * dt);
}

double log_positive_stable(double alpha, rng::Stream& stream)
{
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("stable draw: alpha must lie in (0, 1]");
    const double u = kPi * stream.uniform();
    const double e = stream.exponential();
    if (alpha == 1.0) return 0.0;
    const double beta = 1.0 - alpha;
    return std::log(std::sin(alpha * u)) - std::log(std::sin(u)) / alpha +
           beta / alpha * (std::log(std::sin(beta * u)) - std::log(e));
}

double sample_positive_stable(double alpha, rng::Stream& stream)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("stable draw: alpha must lie in (0, 1)");
    return std::exp(log_positive_stable(alpha, stream));
}

double log_S_increment(double dt, double log_x, const analytics::CsbpParams& params, rng::Stream& stream)
{
    const double alpha = stable_index(dt, params);
    if (dt == 0.0 || log_x == -std::numeric_limits<double>::infinity()) return log_x;
    if (!(alpha > 0.0)) throw std::domain_error("csbp: stable index underflows; use smaller steps");
    const double log_c = params.a * (alpha - 1.0) / params.b;
    return (log_x + log_c) / alpha + log_positive_stable(alpha, stream);
}

double sample_S_increment(double dt, double x, const analytics::CsbpParams& params, rng::Stream& stream)
{
    if (!(x >= 0.0)) throw std::invalid_argument("csbp: mass must be nonnegative");
    if (x == 0.0) {
        stable_index(dt, params);
        return 0.0;
    }
    return std::exp(log_S_increment(dt, std::log(x), params, stream));
}

Trajectory csbp_trajectory(double z0, const std::vector<double>& times, const analytics::CsbpParams& params,
                           rng::Stream& stream)
{
    if (!(z0 >= 0.0)) throw std::invalid_argument("csbp_trajectory: z0 must be nonnegative");
    if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0.0))
        throw std::invalid_argument("csbp_trajectory: times must be sorted and nonnegative");
    Trajectory tr;
    tr.times = times;
    double log_z = z0 == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(z0);
    double t = 0.0;
    for (double s : times) {
        log_z = log_S_increment(s - t, log_z, params, stream);
        t = s;
        tr.log_Z.push_back(log_z);
    }
    return tr;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj)
{
    out << "t,Z\n";
    char buf[128];
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double lz = traj.log_Z[i];
        if (lz == -std::numeric_limits<double>::infinity() || std::abs(lz) < 700.0) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", traj.times[i], std::exp(lz));
        } else {
            // The logarithm carries about 13 significant digits at this size.
            const double l10 = lz / std::numbers::ln10;
            double e = std::floor(l10);
            double m = std::round(std::pow(10.0, l10 - e) * 1e10) / 1e10;
            if (m >= 10.0) {
                m /= 10.0;
                e += 1.0;
            }
            std::snprintf(buf, sizeof buf, "%.17g,%.10fe%+.0f\n", traj.times[i], m, e);
        }
        out << buf;
    }
}

FlowBridge stable_bridge(double alpha, std::size_t J, rng::Stream& stream)
{
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("stable_bridge: alpha must lie in (0, 1]");
    if (J == 0) throw std::invalid_argument("stable_bridge: need J >= 1");
    FlowBridge fb;
    fb.alpha = alpha;
    if (alpha == 1.0) {
        fb.bridge = genealogy::Bridge::identity();
        fb.residual = 1.0;
        fb.bridge.residual = 1.0;
        return fb;
    }
    // Ordered jumps are proportional to Gamma_i^{-1/alpha} for the points
    // Gamma_i of a unit Poisson process; work with ratios to the first.
    std::vector<double> log_gamma(J);
    double g = 0.0;
    for (std::size_t i = 0; i < J; ++i) {
        g += stream.exponential();
        log_gamma[i] = std::log(g);
    }
    std::vector<double> ratio(J);
    for (std::size_t i = 0; i < J; ++i) ratio[i] = std::exp(-(log_gamma[i] - log_gamma[0]) / alpha);
    // Expected sum of the untracked points beyond Gamma_J.
    const double tail = alpha / (1.0 - alpha) * g * ratio[J - 1];
    double total = tail;
    for (std::size_t i = J; i-- > 0;) total += ratio[i];
    fb.gaps.resize(J);
    for (std::size_t i = 0; i < J; ++i) fb.gaps[i] = ratio[i] / total;
    fb.log_jump_sum = std::log(total) - log_gamma[0] / alpha;
    double tracked = 0.0;
    for (double v : fb.gaps) tracked += v;
    fb.residual = std::max(0.0, 1.0 - tracked);

    std::vector<double> loc(J);
    for (auto& v : loc) v = stream.uniform();
    std::vector<std::size_t> order(J);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return loc[a] < loc[b]; });
    auto& br = fb.bridge;
    br.drift = fb.residual;
    br.residual = fb.residual;
    br.x.reserve(J);
    br.value.reserve(J);
    double cum = 0.0;
    for (auto i : order) {
        cum += fb.gaps[i];
        br.x.push_back(loc[i]);
        br.value.push_back(std::min(1.0, cum + br.drift * loc[i]));
    }
    return fb;
}

FlowBridge bridge_from_flow(double s, double t, double z0, const analytics::CsbpParams& params, rng::Stream& stream,
                            std::size_t J, double min_coverage)
{
    if (!(s >= 0.0 && s <= t)) throw std::invalid_argument("bridge_from_flow: need 0 <= s <= t");
    if (!(z0 > 0.0)) throw std::invalid_argument("bridge_from_flow: need z0 > 0");
    check_params(params);
    const double log_y = log_S_increment(s, std::log(z0), params, stream);
    const double alpha = stable_index(t - s, params);
    if (!(alpha > 0.0)) throw std::domain_error("bridge_from_flow: stable index underflows");
    FlowBridge fb = stable_bridge(alpha, J, stream);
    fb.log_mass_s = log_y;
    if (alpha == 1.0) {
        fb.log_mass_t = log_y;
    } else {
        // Total of the subordinator on [0, y]: scale the Poisson sum by the
        // Levy-measure constant.
        const double log_c = params.a * (alpha - 1.0) / params.b;
        const double log_scale = (log_y + log_c - std::lgamma(1.0 - alpha)) / alpha;
        fb.log_mass_t = log_scale + fb.log_jump_sum;
    }
    fb.coverage_ok = fb.residual <= 1.0 - min_coverage;
    return fb;
}

std::vector<double> pd_stick_breaking(double alpha, rng::Stream& stream, double tail)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("pd_stick_breaking: alpha must lie in (0, 1)");
    std::vector<double> pieces;
    double remaining = 1.0;
    for (std::size_t i = 1; remaining > tail && i < 10'000'000; ++i) {
        std::gamma_distribution<double> ga(1.0 - alpha, 1.0);
        std::gamma_distribution<double> gb(static_cast<double>(i) * alpha, 1.0);
        const double x = ga(stream);
        const double y = gb(stream);
        const double v = x / (x + y);
        pieces.push_back(remaining * v);
        remaining *= 1.0 - v;
    }
    return pieces;
}

double pd_largest(double alpha, rng::Stream& stream)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("pd_largest: alpha must lie in (0, 1)");
    double remaining = 1.0;
    double largest = 0.0;
    for (std::size_t i = 1; remaining > largest; ++i) {
        std::gamma_distribution<double> ga(1.0 - alpha, 1.0);
        std::gamma_distribution<double> gb(static_cast<double>(i) * alpha, 1.0);
        const double x = ga(stream);
        const double y = gb(stream);
        const double v = x / (x + y);
        largest = std::max(largest, remaining * v);
        remaining *= 1.0 - v;
    }
    return largest;
}

FlowPartitions bsz_partitions_from_flow(double t, std::size_t n, const std::vector<double>& times,
                                        const analytics::CsbpParams& params, double clock_rate, rng::Stream& stream,
                                        std::size_t J)
{
    check_params(params);
    if (n == 0) throw std::invalid_argument("bsz_partitions_from_flow: need n >= 1");
    if (!(clock_rate > 0.0)) throw std::invalid_argument("bsz_partitions_from_flow: clock rate must be positive");
    if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0.0))
        throw std::invalid_argument("bsz_partitions_from_flow: times must be sorted and nonnegative");
    if (!times.empty() && times.back() > clock_rate * t * (1 + 1e-12))
        throw std::invalid_argument("bsz_partitions_from_flow: clock value beyond clock_rate * t");
    FlowPartitions out;
    out.times = times;
    std::vector<double> v(n);
    for (auto& u : v) u = stream.uniform();
    double prev = 0.0;
    for (double s : times) {
        const double dt = (s - prev) / clock_rate;
        prev = s;
        if (dt > 0.0) {
            const double alpha = stable_index(dt, params);
            if (!(alpha > 0.0)) throw std::domain_error("bsz_partitions_from_flow: stable index underflows");
            const auto fb = stable_bridge(alpha, J, stream);
            out.max_residual = std::max(out.max_residual, fb.residual);
            for (auto& u : v) u = fb.bridge.inverse(u);
        }
        out.partitions.push_back(genealogy::Partition::from_labels(v));
    }
    return out;
}

} // namespace bbmlab::csbp
