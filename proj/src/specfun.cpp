#include "kfp/specfun.hpp"

#include "kfp/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

extern "C" {
#include <quadmath.h>
}

namespace kfp::specfun {

namespace {

constexpr double kPi = std::numbers::pi;
// Beyond this |z| the power series is replaced by the large-argument expansion.
constexpr double kSeriesMax = 40.0;
// Tricomi U switches to its asymptotic series for z above this.
constexpr double kUAsymptotic = 38.0;

bool is_nonpositive_integer(double x) { return x <= 0.0 && x == std::floor(x); }

// sin(pi x) with exact zeros at the integers.
double sinpi(double x)
{
    if (x == std::floor(x)) return 0.0;
    double r = std::fmod(x, 2.0);
    if (r > 1.0) r -= 2.0;
    if (r < -1.0) r += 2.0;
    if (r > 0.5) return std::sin(kPi * (1.0 - r));
    if (r < -0.5) return -std::sin(kPi * (1.0 + r));
    return std::sin(kPi * r);
}

const double kLanczos[9] = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

double lanczos_gamma(double x)
{
    const double z = x - 1.0;
    double s = kLanczos[0];
    for (int i = 1; i < 9; ++i) s += kLanczos[i] / (z + i);
    const double t = z + 7.5;
    const double p = std::pow(t, 0.5 * (z + 0.5));
    return std::sqrt(2.0 * kPi) * p * (p * std::exp(-t)) * s;
}

template <class T>
T absT(T x) { return x < 0 ? -x : x; }

// 1F1 power series.  Stops once terms are negligible and decreasing.
template <class T>
T m_series(T a, T b, T z, T eps)
{
    T term = 1, sum = 1;
    const double zd = static_cast<double>(absT(z));
    for (int n = 0; n < 20000; ++n) {
        const T an = a + n;
        if (an == 0) return sum;
        term *= an / (b + n) * z / (n + 1);
        sum += term;
        if (absT(term) <= eps * absT(sum) && n + 1 > zd) return sum;
    }
    throw QuadratureError("kummer_m: power series did not converge", 20000);
}

// sum_s (p)_s (q)_s / (s! x^s), truncated at its smallest term.
double asym_series(double p, double q, double x)
{
    double term = 1.0, sum = 1.0, prev = 1.0;
    for (int s = 0; s < 500; ++s) {
        const double next = term * (p + s) * (q + s) / ((s + 1) * x);
        if (next == 0.0) return sum + next;
        if (std::fabs(next) > std::fabs(prev) && s > 0) return sum;
        term = next;
        sum += term;
        prev = std::fabs(term);
        if (std::fabs(term) < 1e-17 * std::fabs(sum)) return sum;
    }
    return sum;
}

double guarded_exp_product(double log_mag, double sign)
{
    if (log_mag > 709.0)
        throw RangeError("kummer_m: result overflows double");
    return sign * std::exp(log_mag);
}

// Large positive z (z > kSeriesMax).
double kummer_asym_pos(double a, double b, double z)
{
    const double g_b = gamma_fn(b);
    const double s1 = asym_series(b - a, 1.0 - a, z);
    const double pref1 = g_b * rgamma(a) * s1;
    double dominant = 0.0;
    if (pref1 != 0.0) {
        const double log_mag = z + (a - b) * std::log(z) + std::log(std::fabs(pref1));
        dominant = guarded_exp_product(log_mag, pref1 > 0 ? 1.0 : -1.0);
    }
    const double sub = g_b * rgamma(b - a) * std::cos(kPi * a) * std::pow(z, -a) *
                       asym_series(a, a - b + 1.0, -z);
    return dominant + sub;
}

// Large negative z; r = -z > kSeriesMax.
double kummer_asym_neg(double a, double b, double r)
{
    const double g_b = gamma_fn(b);
    const double algebraic =
        g_b * rgamma(b - a) * std::pow(r, -a) * asym_series(a, 1.0 + a - b, r);
    const double expo = g_b * rgamma(a) * std::cos(kPi * (b - a)) * std::exp(-r) *
                        std::pow(r, a - b) * asym_series(b - a, 1.0 - a, -r);
    return algebraic + expo;
}

// z^p on the real line.  For z < 0 the branch is cbrt(z)^{3p}, which requires
// 3p to be an integer.
double real_branch_pow(double z, double p)
{
    if (z >= 0.0) return std::pow(z, p);
    const double k = 3.0 * p;
    if (std::fabs(k - std::round(k)) > 1e-12)
        throw ParameterError("real-branch power of a negative argument needs 3p integral");
    const double mag = std::pow(-z, p);
    return (static_cast<long long>(std::llround(k)) % 2 == 0) ? mag : -mag;
}

__float128 rgamma_q(__float128 x)
{
    if (x <= 0 && x == floorq(x)) return 0;
    return 1 / tgammaq(x);
}

// Connection formula in 113-bit arithmetic; for 0 < z < kUAsymptotic the two
// terms are of size e^z and cancel.
double tricomi_um_quad(double a, double b, double z)
{
    const __float128 qa = a, qb = b, qz = z;
    const __float128 eps = static_cast<__float128>(1e-33);
    const __float128 pi_q = acosq(static_cast<__float128>(-1));
    const __float128 m1 = m_series<__float128>(qa, qb, qz, eps);
    const __float128 m2 = m_series<__float128>(1 + qa - qb, 2 - qb, qz, eps);
    const __float128 pref = pi_q / sinq(pi_q * qb);
    // parameters combined in quad: a double rounding of 1+a-b would be
    // amplified by e^z
    const __float128 t1 = m1 * rgamma_q(1 + qa - qb) * rgamma_q(qb);
    const __float128 t2 = powq(qz, 1 - qb) * m2 * rgamma_q(qa) * rgamma_q(2 - qb);
    return static_cast<double>(pref * (t1 - t2));
}

void require_regular_alpha(double alpha, const char* who)
{
    if (!(alpha > 0.0 && alpha < 1.0 / 6.0))
        throw ParameterError(std::string(who) + ": alpha must lie in (0, 1/6)");
}

}  // namespace

AlphaParam AlphaParam::regular(double a)
{
    require_regular_alpha(a, "AlphaParam::regular");
    return AlphaParam{a};
}

AlphaParam AlphaParam::singular(double a)
{
    if (!(a < 0.0 && a > -1.0 / 3.0))
        throw ParameterError("AlphaParam::singular: alpha must lie in (-1/3, 0)");
    return AlphaParam{a};
}

double gamma_fn(double x)
{
    if (std::isnan(x)) return x;
    if (is_nonpositive_integer(x))
        throw PoleError("gamma_fn: pole at non-positive integer " + std::to_string(x));
    if (x < 0.5) {
        double g;
        try {
            g = gamma_fn(1.0 - x);
        } catch (const RangeError&) {
            return 0.0;  // |Gamma(x)| underflows
        }
        return kPi / (sinpi(x) * g);
    }
    if (x > 171.6) throw RangeError("gamma_fn: overflow");
    return lanczos_gamma(x);
}

double rgamma(double x)
{
    if (is_nonpositive_integer(x)) return 0.0;
    if (x > 171.6) return 0.0;
    return 1.0 / gamma_fn(x);
}

double kummer_m(double a, double b, double z)
{
    if (is_nonpositive_integer(b))
        throw PoleError("kummer_m: b is a non-positive integer");
    if (z == 0.0) return 1.0;
    if (is_nonpositive_integer(a)) {
        // terminating polynomial
        long double term = 1, sum = 1;
        const int n_max = static_cast<int>(-a);
        for (int n = 0; n < n_max; ++n) {
            term *= (a + n) / (b + n) * static_cast<long double>(z) / (n + 1);
            sum += term;
        }
        const double r = static_cast<double>(sum);
        if (!std::isfinite(r)) throw RangeError("kummer_m: overflow");
        return r;
    }
    if (std::fabs(z) <= kSeriesMax) {
        if (z > 0.0)
            return static_cast<double>(m_series<long double>(a, b, z, 1e-19L));
        // Kummer transformation: positive-term series, no cancellation
        const long double s = m_series<long double>(b - a, b, -z, 1e-19L);
        return static_cast<double>(std::exp(static_cast<long double>(z)) * s);
    }
    if (z > 0.0) return kummer_asym_pos(a, b, z);
    return kummer_asym_neg(a, b, -z);
}

double kummer_m_deriv(double a, double b, double z)
{
    if (a == 0.0) return 0.0;
    return a / b * kummer_m(a + 1.0, b + 1.0, z);
}

double kummer_m_scaled(double a, double b, double z) { return kummer_m(b - a, b, -z); }

double tricomi_u(double a, double b, double z)
{
    if (b == std::floor(b))
        throw PoleError("tricomi_u: integer b is not supported by the connection formula");
    if (z == 0.0) {
        if (b < 1.0) return gamma_fn(1.0 - b) * rgamma(1.0 + a - b);
        throw PoleError("tricomi_u: singular at z = 0 for b > 1");
    }
    if (z >= kUAsymptotic) return std::pow(z, -a) * asym_series(a, a - b + 1.0, -z);
    if (z > 0.0) return tricomi_um_quad(a, b, z);
    const double pref = kPi / std::sin(kPi * b);
    const double t1 = kummer_m(a, b, z) * rgamma(1.0 + a - b) * rgamma(b);
    const double t2 = real_branch_pow(z, 1.0 - b) * kummer_m(1.0 + a - b, 2.0 - b, z) *
                      rgamma(a) * rgamma(2.0 - b);
    return pref * (t1 - t2);
}

double tricomi_u_deriv(double a, double b, double z)
{
    if (a == 0.0) return 0.0;
    return -a * tricomi_u(a + 1.0, b + 1.0, z);
}

double lambda_profile(double alpha, double zeta)
{
    require_regular_alpha(alpha, "lambda_profile");
    if (zeta < 0.0) return tricomi_u(-alpha, 2.0 / 3.0, -zeta * zeta * zeta);
    const double z = -zeta * zeta * zeta;
    const double c0 = kPi / std::sin(2.0 * kPi / 3.0);
    const double t1 = kummer_m(-alpha, 2.0 / 3.0, z) * rgamma(1.0 / 3.0 - alpha) * rgamma(2.0 / 3.0);
    const double t2 =
        zeta * kummer_m(1.0 / 3.0 - alpha, 4.0 / 3.0, z) * rgamma(-alpha) * rgamma(4.0 / 3.0);
    return c0 * (t1 + t2);
}

double lambda_profile_deriv(double alpha, double zeta)
{
    require_regular_alpha(alpha, "lambda_profile_deriv");
    const double z2 = zeta * zeta;
    if (zeta < 0.0) return -3.0 * z2 * tricomi_u_deriv(-alpha, 2.0 / 3.0, -z2 * zeta);
    const double z = -z2 * zeta;
    const double c0 = kPi / std::sin(2.0 * kPi / 3.0);
    const double a1 = -alpha, a2 = 1.0 / 3.0 - alpha;
    const double d1 = -3.0 * z2 * (a1 / (2.0 / 3.0)) * kummer_m(a1 + 1.0, 5.0 / 3.0, z) *
                      rgamma(1.0 / 3.0 - alpha) * rgamma(2.0 / 3.0);
    const double d2 = (kummer_m(a2, 4.0 / 3.0, z) -
                       3.0 * z2 * zeta * (a2 / (4.0 / 3.0)) * kummer_m(a2 + 1.0, 7.0 / 3.0, z)) *
                      rgamma(-alpha) * rgamma(4.0 / 3.0);
    return c0 * (d1 + d2);
}

double lambda_profile_deriv2(double alpha, double zeta)
{
    return -3.0 * zeta * zeta * lambda_profile_deriv(alpha, zeta) +
           9.0 * alpha * zeta * lambda_profile(alpha, zeta);
}

double k_plus(double alpha)
{
    if (!(alpha >= 0.0 && alpha <= 1.0 / 6.0))
        throw ParameterError("k_plus: alpha must lie in [0, 1/6]");
    return 2.0 * std::cos(kPi * (alpha + 1.0 / 3.0));
}

double wronskian_mu(double alpha, double eta)
{
    if (eta == 0.0) throw PoleError("wronskian_mu: eta = 0");
    const double c = std::cbrt(eta);
    return -gamma_fn(2.0 / 3.0) / (c * c) * std::exp(eta) * rgamma(-2.0 / 3.0 - alpha);
}

}  // namespace kfp::specfun
