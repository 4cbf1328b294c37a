#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bbmlab/rng.hpp"

namespace bbmlab::stats {

enum class Gate { Hard, Soft };

/// Outcome of one statistical or analytic check.
struct StatReport {
    std::string name;
    Gate gate = Gate::Hard;
    double statistic = 0.0;
    double p_value = 1.0;   ///< NaN when the check is not a hypothesis test
    double level = 0.01;    ///< rejection level for p-values
    bool passed = false;
    std::size_t samples = 0;
    std::string config_hash;
    std::map<std::string, double> values;  ///< oracle and observed values used
    std::string detail;
};

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

MeanSe mean_se(std::span<const double> xs);

/// Asymptotic Kolmogorov tail P(sqrt(n) D > lambda).
double kolmogorov_q(double lambda);

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
StatReport ks_test(std::span<const double> samples, const std::function<double(double)>& cdf,
                   double level = 0.01);

/// Two-sample Kolmogorov-Smirnov test.
StatReport ks_two_sample(std::span<const double> a, std::span<const double> b, double level = 0.01);

/// Pearson chi-square; `expected` are expected counts (same total).
/// Bins with zero expectation must have zero count.
StatReport chi_square(std::span<const double> counts, std::span<const double> expected, double level = 0.01);

/// Hill tail-index estimate 1/H from the top k order statistics.
double hill(std::span<const double> samples, std::size_t k);

struct HillPoint {
    std::size_t k = 0;
    double index = 0.0;
};

struct HillSweep {
    std::vector<HillPoint> points;
    /// Longest run of consecutive sweep points whose indices stay within
    /// +-5% of the run mean and whose k values span a factor of at least 3.
    std::size_t plateau_begin = 0;
    std::size_t plateau_end = 0;  ///< one past the last point; equal to begin if none
    double plateau_index = 0.0;   ///< median index over the plateau
    bool heavy_tailed = false;    ///< a plateau was found
};

/// Hill estimates on a geometric grid of k between n/200 and n/20.
HillSweep hill_sweep(std::span<const double> samples, std::size_t grid_points = 24);

/// Percentile bootstrap interval for a statistic (2000 resamples by default).
std::pair<double, double> bootstrap_ci(const std::function<double(std::span<const double>)>& statistic,
                                       std::span<const double> samples, double level, rng::Stream& stream,
                                       std::size_t resamples = 2000);

/// Empirical x * P(X > x) on a grid of x values.
std::vector<std::pair<double, double>> tail_product(std::span<const double> samples, std::span<const double> xs);

double median(std::vector<double> xs);

} // namespace bbmlab::stats
