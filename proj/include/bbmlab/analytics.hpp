#pragma once

// Closed-form kernels for branching Brownian motion with absorption:
// population parameters, strip densities, the strip Green function,
// Lambda-coalescent rates and the Neveu-type CSBP semigroup.
//
// Everything here is a pure function of its arguments.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>

namespace bbmlab::analytics {

using Rational = boost::multiprecision::cpp_rational;

/// Near-critical parameters for population scale N.
struct ModelParams {
    std::int64_t N = 0;
    double mu_squared = 0.0;
    double mu = 0.0;   ///< particles drift with velocity -mu
    double L = 0.0;    ///< right reference level of the Z statistic
    double A = 0.0;    ///< offset of the killing level
    double L_A = 0.0;  ///< killing level L - A/sqrt(2)
};

/// 2 - 2 pi^2 / (log N + 3 log log N)^2; negative for N < 6.
double drift_squared(std::int64_t N);

/// Throws std::invalid_argument for N < 3, when the drift is not real
/// (N < 6), or when L_A <= 0.
ModelParams derive_params(std::int64_t N, double A = 0.0);

/// 1 - mu^2/2 - pi^2/(2 L^2); zero for parameters from derive_params.
double growth_rate(double mu, double K);

/// Branching mechanism Psi(u) = a u + b u log u.
struct CsbpParams {
    double a = 0.0;
    double b = 1.0;
};

enum class Representation { Eigen, Images };

/// Strip (0, K) with drift -mu.  Without an explicit truncation the series
/// is cut where the remainder bound drops below `tolerance` (at most 512
/// terms), and short times switch to the method of images.
struct StripSpec {
    double K = 1.0;
    double mu = 0.0;
    std::optional<int> truncation_terms;
    double tolerance = 1e-10;
};

struct SeriesValue {
    double value = 0.0;
    double remainder_bound = 0.0;  ///< rigorous bound on |value - exact|
    int terms = 0;
    Representation representation = Representation::Eigen;
    bool exceeds_tolerance = false;
};

/// Transition density of Brownian motion killed at 0 and K.
SeriesValue strip_density_v(double t, double x, double y, const StripSpec& spec);

/// Expected particle density of branching BM (rate-one binary branching)
/// with drift -mu killed at 0 and K.
SeriesValue bbm_density_q(double t, double x, double y, const StripSpec& spec);

/// Leading (n = 1) eigenfunction term of bbm_density_q.
double principal_density_p(double t, double x, double y, const StripSpec& spec);

/// sup |q/p - 1| bound: sum_{n>=2} n^2 exp(-pi^2 (n^2 - 1) t / 2K^2).
double eterm_bound(double t, double K);

/// Expected number of particles in [a, b] at time t from one particle at x,
/// i.e. the integral of bbm_density_q over [a, b], in closed form.
double strip_mass(double t, double x, double a, double b, const StripSpec& spec);

/// Leading-order expected population size at time t started from one
/// particle at x: (2/K) e^{growth t} e^{mu x} sin(pi x/K) int_0^K e^{-mu y} sin(pi y/K) dy.
double expected_count_leading(double t, double x, const StripSpec& spec);

/// Green function of driftless Brownian motion killed outside (0, K).
double green_strip(double x, double y, double K);

/// Survival probability of a Brownian bridge from x to y over time h that
/// stays inside (0, K); drift does not affect bridge laws.
double strip_bridge_survival(double x, double y, double h, double K);

/// Survival probability of a Brownian bridge from x > 0 to y > 0 that stays
/// above 0.
double halfline_bridge_survival(double x, double y, double h);

enum class LambdaMeasure { Uniform, PointMassAtZero };

/// Exact lambda_{b,k} for b <= 64.
Rational lambda_bk_exact(int b, int k, LambdaMeasure measure);

/// lambda_{b,k}; exact rational converted to double for b <= 64, Beta
/// function through lgamma above.
double lambda_bk(int b, int k, LambdaMeasure measure);

double csbp_psi(double u, const CsbpParams& params);

/// u_t(lambda) = lambda^{e^{-bt}} exp(a (e^{-bt} - 1) / b).
double csbp_laplace_u(double t, double lambda, const CsbpParams& params);

/// Unnormalised stable profile e^{-mu y} sin(pi y / L) on (0, L).
double stable_profile_weight(double y, double mu, double L);
/// Integral of the stable profile over (0, L).
double stable_profile_mass(double mu, double L);
/// Normalised cumulative distribution of the stable profile.
double stable_profile_cdf(double x, double mu, double L);

} // namespace bbmlab::analytics
