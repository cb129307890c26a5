#pragma once

#include <array>

namespace gwe::special {

// Riemann zeta for real s != 1.
double zeta(double s);

// Hurwitz zeta sum_{k>=0} (k+a)^{-s}, s > 1, a > 0.
double hurwitz_zeta(double s, double a);

// Li_nu(e^{-lambda}) for non-integer nu and lambda > 0.
// Small lambda uses the expansion around s=1; larger lambda sums the series directly.
class Polylog {
public:
    explicit Polylog(double nu);
    double operator()(double lambda) const;
    // zeta(nu) - Li_nu(e^{-lambda}); only meaningful for nu > 1.
    double complement(double lambda) const;
    double nu() const { return nu_; }

private:
    static constexpr int kTerms = 48;
    double nu_;
    double gamma_1mnu_;
    std::array<double, kTerms> zeta_shift_{};  // zeta(nu - j)
    double direct(double lambda) const;
};

}  // namespace gwe::special
