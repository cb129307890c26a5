#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gwe/rng.hpp"

namespace gwe {

enum class Family { Finite, Geometric, PowerTail };

inline constexpr std::uint64_t kDefaultKmax = 10'000'000;

// Offspring law of a Galton-Watson tree. Cheap to copy; tables are shared and immutable.
class OffspringLaw {
public:
    static OffspringLaw finite(std::vector<double> pmf);
    // p_k = (1-a) a^k
    static OffspringLaw geometric(double a);
    // p_k = C k^{-(alpha+1)} for k >= 1, C = (1-p0)/zeta(alpha+1)
    static OffspringLaw power_tail(double alpha, double p0, std::uint64_t k_max = kDefaultKmax);
    static OffspringLaw power_tail_with_mean(double alpha, double mean,
                                             std::uint64_t k_max = kDefaultKmax);

    Family family() const;
    double geometric_a() const;
    double alpha() const;  // PowerTail parameter
    double power_constant() const;  // C
    std::uint64_t k_max() const;
    const std::vector<double>& finite_pmf() const;

    double pmf(std::uint64_t k) const;
    double tail(std::uint64_t k) const;  // P(xi >= k)
    double p0() const { return pmf(0); }
    double mean() const;
    double variance() const;  // +inf for PowerTail
    bool finite_variance() const;
    double tail_index() const;  // 2 when the variance is finite

    double gf(double s) const;
    // 1 - f(1 - t), accurate for tiny t
    double gf_complement(double t) const;
    double gf_derivative(double s, int order = 1) const;

    // law with pmf p_k q^{k-1}; the trap law of a supercritical tree when f(q) = q
    OffspringLaw tilted(double q) const;

    std::uint64_t sample_from_uniform(double u) const;
    std::uint64_t sample_positive_from_uniform(double u) const;  // conditioned on >= 1
    template <class G>
    std::uint64_t sample(G& g) const { return sample_from_uniform(uniform_open(g)); }
    template <class G>
    std::uint64_t sample_positive(G& g) const { return sample_positive_from_uniform(uniform_open(g)); }

    std::string describe() const;

    struct Impl;

private:
    explicit OffspringLaw(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
    friend class SizeBiasedLaw;
};

// pmf k p_k / mu
class SizeBiasedLaw {
public:
    explicit SizeBiasedLaw(OffspringLaw base);

    const OffspringLaw& base() const;
    double pmf(std::uint64_t k) const;
    double tail(std::uint64_t k) const;  // P(xi* >= k)
    double mean() const;  // E[xi^2]/mu, +inf for PowerTail

    std::uint64_t sample_from_uniform(double u) const;
    template <class G>
    std::uint64_t sample(G& g) const { return sample_from_uniform(uniform_open(g)); }

    struct Impl;

private:
    std::shared_ptr<const Impl> impl_;
};

// a_n = (c' n)^{1/(alpha-1)} with c' = lim x^{alpha-1} P(xi* >= x)
class ScalingSequence {
public:
    explicit ScalingSequence(const OffspringLaw& base);
    ScalingSequence(double c_prime, double index);

    double operator()(double n) const;
    double c_prime() const { return c_prime_; }
    double index() const { return index_; }

private:
    double c_prime_;
    double index_;
};

}  // namespace gwe
