#include "kfp/barriers.hpp"
#include "kfp/errors.hpp"
#include "kfp/specfun.hpp"

#include <cmath>

namespace kfp::barriers {

HermiteTable::HermiteTable(double lo, double hi, std::vector<double> values, std::vector<double> derivs)
    : lo_(lo), hi_(hi), val_(std::move(values)), der_(std::move(derivs))
{
    if (val_.size() < 2 || val_.size() != der_.size() || !(hi > lo))
        throw ParameterError("HermiteTable: inconsistent table");
    h_ = (hi_ - lo_) / static_cast<double>(val_.size() - 1);
}

namespace {

// Locates s in the table: cell index and local coordinate in [0, 1].
inline void locate(double s, double lo, double h, std::size_t n, std::size_t& i, double& q)
{
    double pos = (s - lo) / h;
    if (pos < 0.0) pos = 0.0;
    i = static_cast<std::size_t>(pos);
    if (i >= n - 1) i = n - 2;
    q = pos - static_cast<double>(i);
}

}  // namespace

double HermiteTable::value(double s) const
{
    std::size_t i;
    double q;
    locate(s, lo_, h_, val_.size(), i, q);
    const double q2 = q * q, q3 = q2 * q;
    const double h00 = 2 * q3 - 3 * q2 + 1, h10 = q3 - 2 * q2 + q;
    const double h01 = -2 * q3 + 3 * q2, h11 = q3 - q2;
    return h00 * val_[i] + h10 * h_ * der_[i] + h01 * val_[i + 1] + h11 * h_ * der_[i + 1];
}

double HermiteTable::deriv(double s) const
{
    std::size_t i;
    double q;
    locate(s, lo_, h_, val_.size(), i, q);
    const double q2 = q * q;
    const double d00 = 6 * q2 - 6 * q, d10 = 3 * q2 - 4 * q + 1;
    const double d01 = -6 * q2 + 6 * q, d11 = 3 * q2 - 2 * q;
    return (d00 * val_[i] + d01 * val_[i + 1]) / h_ + d10 * der_[i] + d11 * der_[i + 1];
}

SelfSimilarProfile::SelfSimilarProfile(double alpha, double zeta_max, double step) : alpha_(alpha)
{
    specfun::AlphaParam::regular(alpha);
    const int n = static_cast<int>(std::lround(2.0 * zeta_max / step));
    std::vector<double> val(n + 1), der(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double z = -zeta_max + 2.0 * zeta_max * i / n;
        val[i] = specfun::lambda_profile(alpha, z);
        der[i] = specfun::lambda_profile_deriv(alpha, z);
    }
    table_ = HermiteTable(-zeta_max, zeta_max, std::move(val), std::move(der));
}

double SelfSimilarProfile::lambda(double zeta) const
{
    return table_.contains(zeta) ? table_.value(zeta) : specfun::lambda_profile(alpha_, zeta);
}

double SelfSimilarProfile::lambda_deriv(double zeta) const
{
    return table_.contains(zeta) ? table_.deriv(zeta) : specfun::lambda_profile_deriv(alpha_, zeta);
}

}  // namespace kfp::barriers
