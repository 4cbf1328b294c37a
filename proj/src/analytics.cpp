#include "bbmlab/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bbmlab::analytics {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxEigenTerms = 512;

double gaussian_kernel(double z, double t)
{
    return std::exp(-z * z / (2.0 * t)) / std::sqrt(2.0 * kPi * t);
}

// Upper bound on sum_{n > T} n^2 exp(-c n^2).  Terms are summed explicitly
// up to the mode of x^2 e^{-c x^2}; past it the summand is decreasing and
// the rest is bounded by the integral.
double n2_tail(double c, int T)
{
    const double mode = std::ceil(1.0 / std::sqrt(c));
    const double stop = std::max(static_cast<double>(T), mode);
    double sum = 0.0;
    for (double n = T + 1.0; n <= stop; n += 1.0) sum += n * n * std::exp(-c * n * n);
    const double sc = std::sqrt(c);
    sum += stop * std::exp(-c * stop * stop) / (2.0 * c)
         + std::sqrt(kPi) / (4.0 * c * sc) * std::erfc(sc * stop);
    return sum;
}

void check_strip_point(double t, double x, double y, const StripSpec& spec)
{
    if (!(spec.K > 0.0)) throw std::invalid_argument("strip: K must be positive");
    if (spec.truncation_terms && *spec.truncation_terms < 1)
        throw std::invalid_argument("strip: truncation_terms must be >= 1");
    if (!(t > 0.0)) throw std::invalid_argument("strip: t must be positive");
    if (!(x > 0.0 && x < spec.K) || !(y > 0.0 && y < spec.K))
        throw std::invalid_argument("strip: x and y must lie in (0, K)");
}

// Eigenfunction series of v_t truncated after `terms` terms, or chosen so
// that the remainder bound (scaled by `scale`) is below `tol`.
SeriesValue eigen_v(double t, double x, double y, double K, std::optional<int> terms, double tol,
                    double scale)
{
    const double c = kPi * kPi * t / (2.0 * K * K);
    const double sx = std::sin(kPi * x / K);
    const double sy = std::sin(kPi * y / K);
    const double envelope = 2.0 / K * sx * sy;

    int T = 0;
    if (terms) {
        T = *terms;
    } else {
        T = 1;
        while (T < kMaxEigenTerms && scale * envelope * n2_tail(c, T) >= tol) ++T;
    }

    double sum = 0.0;
    for (int n = 1; n <= T; ++n)
        sum += std::exp(-c * n * n) * std::sin(n * kPi * x / K) * std::sin(n * kPi * y / K);

    SeriesValue out;
    out.value = 2.0 / K * sum;
    out.remainder_bound = envelope * n2_tail(c, T);
    out.terms = T;
    out.representation = Representation::Eigen;
    return out;
}

// Method of images: v_t = sum_k phi(y - x + 2kK) - phi(y + x + 2kK).
SeriesValue image_v(double t, double x, double y, double K, double tol, double scale)
{
    auto bound = [&](int m) { return 8.0 * gaussian_kernel(2.0 * m * K, t); };
    int m = 1;
    while (m < 64 && scale * bound(m) >= tol) ++m;
    double sum = 0.0;
    for (int k = -m; k <= m; ++k)
        sum += gaussian_kernel(y - x + 2.0 * k * K, t) - gaussian_kernel(y + x + 2.0 * k * K, t);
    SeriesValue out;
    out.value = sum;
    out.remainder_bound = bound(m);
    out.terms = 2 * m + 1;
    out.representation = Representation::Images;
    return out;
}

SeriesValue strip_v_scaled(double t, double x, double y, const StripSpec& spec, double scale)
{
    check_strip_point(t, x, y, spec);
    SeriesValue v;
    if (!spec.truncation_terms && t < 0.01 * spec.K * spec.K)
        v = image_v(t, x, y, spec.K, spec.tolerance, scale);
    else
        v = eigen_v(t, x, y, spec.K, spec.truncation_terms, spec.tolerance, scale);
    v.exceeds_tolerance = scale * v.remainder_bound > spec.tolerance;
    return v;
}

double log_factor(double t, double x, double y, double mu)
{
    return (1.0 - 0.5 * mu * mu) * t + mu * (x - y);
}

// int_a^b e^{-mu y} sin(w y) dy
double exp_sin_integral(double mu, double w, double a, double b)
{
    auto anti = [&](double s) {
        return -std::exp(-mu * s) * (mu * std::sin(w * s) + w * std::cos(w * s)) / (mu * mu + w * w);
    };
    return anti(b) - anti(a);
}

// Phi(hi) - Phi(lo) without cancellation in the upper tail.
double normal_interval(double lo, double hi)
{
    if (lo > 0.0) return 0.5 * (std::erfc(lo / std::numbers::sqrt2) - std::erfc(hi / std::numbers::sqrt2));
    return 0.5 * (std::erfc(-hi / std::numbers::sqrt2) - std::erfc(-lo / std::numbers::sqrt2));
}

} // namespace

namespace {

double scale_of(std::int64_t N)
{
    if (N < 3) throw std::invalid_argument("derive_params: N must be >= 3, got " + std::to_string(N));
    const double logN = std::log(static_cast<double>(N));
    return logN + 3.0 * std::log(logN);
}

} // namespace

double drift_squared(std::int64_t N)
{
    const double scale = scale_of(N);
    return 2.0 - 2.0 * kPi * kPi / (scale * scale);
}

ModelParams derive_params(std::int64_t N, double A)
{
    const double scale = scale_of(N);
    ModelParams p;
    p.N = N;
    p.mu_squared = 2.0 - 2.0 * kPi * kPi / (scale * scale);
    if (!(p.mu_squared > 0.0))
        throw std::invalid_argument("derive_params: drift is not real for N = " + std::to_string(N) + " (need N >= 6)");
    p.mu = std::sqrt(p.mu_squared);
    p.L = scale / std::numbers::sqrt2;
    p.A = A;
    p.L_A = (scale - A) / std::numbers::sqrt2;
    if (!(p.L_A > 0.0)) throw std::invalid_argument("derive_params: A leaves L_A <= 0");
    return p;
}

double growth_rate(double mu, double K)
{
    return 1.0 - 0.5 * mu * mu - kPi * kPi / (2.0 * K * K);
}

SeriesValue strip_density_v(double t, double x, double y, const StripSpec& spec)
{
    return strip_v_scaled(t, x, y, spec, 1.0);
}

SeriesValue bbm_density_q(double t, double x, double y, const StripSpec& spec)
{
    check_strip_point(t, x, y, spec);
    const double factor = std::exp(log_factor(t, x, y, spec.mu));
    SeriesValue v = strip_v_scaled(t, x, y, spec, factor);
    v.value *= factor;
    v.remainder_bound *= factor;
    return v;
}

double principal_density_p(double t, double x, double y, const StripSpec& spec)
{
    check_strip_point(t, x, y, spec);
    const double K = spec.K;
    return 2.0 / K * std::exp(growth_rate(spec.mu, K) * t + spec.mu * (x - y)) * std::sin(kPi * x / K)
         * std::sin(kPi * y / K);
}

double eterm_bound(double t, double K)
{
    if (!(t > 0.0) || !(K > 0.0)) throw std::invalid_argument("eterm_bound: t and K must be positive");
    const double c = kPi * kPi * t / (2.0 * K * K);
    // exp(c) * sum_{n>=2} n^2 exp(-c n^2), summed as exp(-c (n^2 - 1)) to avoid overflow.
    double sum = 0.0;
    for (int n = 2; n < 100000; ++n) {
        const double term = n * static_cast<double>(n) * std::exp(-c * (n * static_cast<double>(n) - 1.0));
        sum += term;
        if (term < 1e-18 * sum && n * n * c > 2.0) break;
    }
    return sum;
}

double strip_mass(double t, double x, double a, double b, const StripSpec& spec)
{
    const double K = spec.K;
    if (!(K > 0.0)) throw std::invalid_argument("strip_mass: K must be positive");
    if (!(t > 0.0)) throw std::invalid_argument("strip_mass: t must be positive");
    if (!(x > 0.0 && x < K)) throw std::invalid_argument("strip_mass: x must lie in (0, K)");
    a = std::clamp(a, 0.0, K);
    b = std::clamp(b, 0.0, K);
    if (b <= a) return 0.0;
    const double mu = spec.mu;
    const double pre = (1.0 - 0.5 * mu * mu) * t + mu * x;

    if (t >= 0.01 * K * K) {
        const double c = kPi * kPi * t / (2.0 * K * K);
        double sum = 0.0;
        for (int n = 1; n <= 4 * kMaxEigenTerms; ++n) {
            const double decay = std::exp(-c * n * n);
            const double w = n * kPi / K;
            sum += decay * std::sin(w * x) * exp_sin_integral(mu, w, a, b);
            if (decay < 1e-18) break;
        }
        return std::exp(pre) * 2.0 / K * sum;
    }

    // Images: int_a^b e^{-mu y} phi(y + d) dy
    //   = e^{mu d + mu^2 t/2} [Phi((b + d + mu t)/sqrt t) - Phi((a + d + mu t)/sqrt t)].
    const double st = std::sqrt(t);
    auto piece = [&](double d) {
        const double lo = (a + d + mu * t) / st;
        const double hi = (b + d + mu * t) / st;
        if (lo > 40.0 || hi < -40.0) return 0.0;
        const double mass = normal_interval(lo, hi);
        if (mass <= 0.0) return 0.0;
        return std::exp(pre + mu * d + 0.5 * mu * mu * t + std::log(mass));
    };
    double sum = 0.0;
    for (int k = -3; k <= 3; ++k) {
        const double s = 2.0 * k * K;
        sum += piece(s - x) - piece(s + x);
    }
    return sum;
}

double expected_count_leading(double t, double x, const StripSpec& spec)
{
    const double K = spec.K;
    if (!(x > 0.0 && x < K)) throw std::invalid_argument("expected_count_leading: x must lie in (0, K)");
    return 2.0 / K * std::exp(growth_rate(spec.mu, K) * t + spec.mu * x) * std::sin(kPi * x / K)
         * exp_sin_integral(spec.mu, kPi / K, 0.0, K);
}

double green_strip(double x, double y, double K)
{
    if (!(K > 0.0)) throw std::invalid_argument("green_strip: K must be positive");
    if (x < 0.0 || x > K || y < 0.0 || y > K) throw std::invalid_argument("green_strip: x, y must lie in [0, K]");
    return y >= x ? 2.0 * x * (K - y) / K : 2.0 * y * (K - x) / K;
}

double strip_bridge_survival(double x, double y, double h, double K)
{
    if (x <= 0.0 || x >= K || y <= 0.0 || y >= K) return 0.0;
    if (!(h > 0.0)) return 1.0;
    if (h < K * K) {
        double sum = -std::expm1(-2.0 * x * y / h);
        for (int k = 1; k < 64; ++k) {
            const double kk = k * K;
            const double terms = std::exp(-2.0 * kk * (kk + y - x) / h) + std::exp(-2.0 * kk * (kk - y + x) / h)
                               - std::exp(-2.0 * (x + kk) * (y + kk) / h) - std::exp(-2.0 * (x - kk) * (y - kk) / h);
            sum += terms;
            if (std::exp(-2.0 * kk * (kk - K) / h) < 1e-18) break;
        }
        return std::clamp(sum, 0.0, 1.0);
    }
    const double v = eigen_v(h, x, y, K, std::nullopt, 1e-14, 1.0).value;
    return std::clamp(v / gaussian_kernel(y - x, h), 0.0, 1.0);
}

double halfline_bridge_survival(double x, double y, double h)
{
    if (x <= 0.0 || y <= 0.0) return 0.0;
    if (!(h > 0.0)) return 1.0;
    return -std::expm1(-2.0 * x * y / h);
}

Rational lambda_bk_exact(int b, int k, LambdaMeasure measure)
{
    if (k < 2 || k > b) throw std::invalid_argument("lambda_bk: need 2 <= k <= b");
    if (b > 64) throw std::invalid_argument("lambda_bk_exact: b must be <= 64");
    if (measure == LambdaMeasure::PointMassAtZero) return Rational(k == 2 ? 1 : 0);
    // Beta(k-1, b-k+1) = 1 / ((b-1) * C(b-2, k-2)).
    boost::multiprecision::cpp_int binom = 1;
    for (int i = 1; i <= k - 2; ++i) binom = binom * (b - 2 - (k - 2) + i) / i;
    return Rational(boost::multiprecision::cpp_int(1), binom * (b - 1));
}

double lambda_bk(int b, int k, LambdaMeasure measure)
{
    if (k < 2 || k > b) throw std::invalid_argument("lambda_bk: need 2 <= k <= b");
    if (b <= 64) return static_cast<double>(lambda_bk_exact(b, k, measure));
    if (measure == LambdaMeasure::PointMassAtZero) return k == 2 ? 1.0 : 0.0;
    return std::exp(std::lgamma(k - 1.0) + std::lgamma(b - k + 1.0) - std::lgamma(static_cast<double>(b)));
}

double csbp_psi(double u, const CsbpParams& params)
{
    if (u < 0.0) throw std::invalid_argument("csbp_psi: u must be nonnegative");
    if (u == 0.0) return 0.0;
    return params.a * u + params.b * u * std::log(u);
}

double csbp_laplace_u(double t, double lambda, const CsbpParams& params)
{
    if (!(params.b > 0.0)) throw std::invalid_argument("csbp_laplace_u: b must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("csbp_laplace_u: lambda must be positive");
    if (t < 0.0) throw std::invalid_argument("csbp_laplace_u: t must be nonnegative");
    if (t == 0.0) return lambda;
    const double index = std::exp(-params.b * t);
    return std::exp(index * std::log(lambda) + params.a * std::expm1(-params.b * t) / params.b);
}

double stable_profile_weight(double y, double mu, double L)
{
    if (y <= 0.0 || y >= L) return 0.0;
    return std::exp(-mu * y) * std::sin(kPi * y / L);
}

double stable_profile_mass(double mu, double L)
{
    return exp_sin_integral(mu, kPi / L, 0.0, L);
}

double stable_profile_cdf(double x, double mu, double L)
{
    if (x <= 0.0) return 0.0;
    if (x >= L) return 1.0;
    return std::clamp(exp_sin_integral(mu, kPi / L, 0.0, x) / stable_profile_mass(mu, L), 0.0, 1.0);
}

} // namespace bbmlab::analytics
