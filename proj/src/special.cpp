#include "gwe/special.hpp"

#include <cmath>
#include <numbers>

#include "gwe/errors.hpp"

namespace gwe::special {
namespace {

// B_{2j} / (2j)!, j = 1..12
constexpr std::array<double, 12> kBernoulliOverFact = {
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40320.0,
    5.0 / 66.0 / 3628800.0,
    -691.0 / 2730.0 / 479001600.0,
    7.0 / 6.0 / 87178291200.0,
    -3617.0 / 510.0 / 20922789888000.0,
    43867.0 / 798.0 / 6402373705728000.0,
    -174611.0 / 330.0 / 2432902008176640000.0,
    854513.0 / 138.0 / 1.1240007277776077e21,
    -236364091.0 / 2730.0 / 6.204484017332394e23,
};

// Euler-Maclaurin tail sum_{k>=0} (x+k)^{-s} with x already large.
double em_tail(double s, double x) {
    double sum = std::pow(x, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(x, -s);
    double rising = s;  // s (s+1) ... (s+2j-2)
    double xpow = std::pow(x, -s - 1.0);
    for (int j = 0; j < 12; ++j) {
        double term = kBernoulliOverFact[j] * rising * xpow;
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        rising *= (s + 2 * j + 1) * (s + 2 * j + 2);
        xpow /= x * x;
    }
    return sum;
}

}  // namespace

double hurwitz_zeta(double s, double a) {
    if (!(s > 1.0) || !(a > 0.0)) throw DomainError("hurwitz_zeta: need s > 1, a > 0");
    constexpr double kShift = 32.0;
    double head = 0.0;
    while (a < kShift) {
        head += std::pow(a, -s);
        a += 1.0;
    }
    return head + em_tail(s, a);
}

double zeta(double s) {
    if (s == 1.0) throw DomainError("zeta: pole at s = 1");
    if (s < 0.0) {
        // reflection
        const double pi = std::numbers::pi;
        return std::pow(2.0, s) * std::pow(pi, s - 1.0) * std::sin(pi * s / 2.0) *
               std::tgamma(1.0 - s) * zeta(1.0 - s);
    }
    if (s > 1.0) return hurwitz_zeta(s, 1.0);
    // 0 <= s < 1: same Euler-Maclaurin formula, continued analytically
    double head = 0.0;
    constexpr int kN = 32;
    for (int k = 1; k < kN; ++k) head += std::pow(static_cast<double>(k), -s);
    return head + em_tail(s, kN);
}

Polylog::Polylog(double nu) : nu_(nu), gamma_1mnu_(std::tgamma(1.0 - nu)) {
    if (nu == std::round(nu)) throw DomainError("Polylog: integer order not supported");
    for (int j = 0; j < kTerms; ++j) zeta_shift_[j] = zeta(nu - j);
}

double Polylog::direct(double lambda) const {
    double sum = 0.0;
    for (int k = 1;; ++k) {
        double term = std::pow(static_cast<double>(k), -nu_) * std::exp(-lambda * k);
        sum += term;
        if (term < 1e-19 * std::abs(sum) && k > 8) break;
    }
    return sum;
}

double Polylog::operator()(double lambda) const {
    if (lambda >= 1.0) return direct(lambda);
    double sum = gamma_1mnu_ * std::pow(lambda, nu_ - 1.0);
    double p = 1.0;
    for (int j = 0; j < kTerms; ++j) {
        sum += zeta_shift_[j] * p;
        p *= -lambda / (j + 1);
    }
    return sum;
}

double Polylog::complement(double lambda) const {
    if (lambda >= 1.0) return zeta_shift_[0] - direct(lambda);
    double sum = -gamma_1mnu_ * std::pow(lambda, nu_ - 1.0);
    double p = -lambda;
    for (int j = 1; j < kTerms; ++j) {
        sum -= zeta_shift_[j] * p;
        p *= -lambda / (j + 1);
    }
    return sum;
}

}  // namespace gwe::special
