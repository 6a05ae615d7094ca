#pragma once

// Gamma, Kummer M, Tricomi U and the self-similar wall profile
//   Lambda(zeta) = U(-alpha, 2/3, -zeta^3)
// which solves Lambda'' + 3 zeta^2 Lambda' - 9 alpha zeta Lambda = 0.
//
// For negative arguments z^{1-b} is taken on the real branch cbrt(z)^{3(1-b)},
// so tricomi_u accepts z < 0 only when 3b is an integer.  With b = 2/3 this
// is the real cube root.

namespace kfp::specfun {

// Exponent of the self-similar profile.  Regular profiles need
// 0 < alpha < 1/6; the singular steady states use a small negative alpha.
struct AlphaParam {
    double value;

    static AlphaParam regular(double a);
    static AlphaParam singular(double a);
};

inline constexpr double kDefaultAlpha = 0.1;

double gamma_fn(double x);
// 1/Gamma(x); zero at the poles.
double rgamma(double x);

double kummer_m(double a, double b, double z);
// d/dz M(a,b,z) = (a/b) M(a+1,b+1,z)
double kummer_m_deriv(double a, double b, double z);
// e^{-z} M(a,b,z), evaluated without forming e^z.
double kummer_m_scaled(double a, double b, double z);

double tricomi_u(double a, double b, double z);
// d/dz U(a,b,z) = -a U(a+1,b+1,z)
double tricomi_u_deriv(double a, double b, double z);

double lambda_profile(double alpha, double zeta);
double lambda_profile_deriv(double alpha, double zeta);
// Second derivative from the profile ODE.
double lambda_profile_deriv2(double alpha, double zeta);

// Lambda(zeta) ~ k_plus(alpha) |zeta|^{3 alpha} as zeta -> +infinity.
double k_plus(double alpha);

// W{M(a,2/3,.), U(a,2/3,.)}(eta) for a = -(2/3 + alpha).
double wronskian_mu(double alpha, double eta);

}  // namespace kfp::specfun
