#include "gwe/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>

#include "gwe/errors.hpp"
#include "gwe/special.hpp"

namespace gwe {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxOrder = 8;
constexpr std::uint64_t kHugeCount = std::uint64_t{1} << 62;

// Index k with tail[k+1] <= u < tail[k] for a decreasing table with tail[0] = 1.
std::uint64_t invert_table(const std::vector<double>& tail, double u) {
    const std::size_t n = tail.size();
    std::size_t k = 0;
    for (; k + 1 < n && k < 32; ++k)
        if (tail[k + 1] <= u) return k;
    auto it = std::partition_point(tail.begin() + static_cast<std::ptrdiff_t>(k), tail.end(),
                                   [u](double s) { return s > u; });
    return static_cast<std::uint64_t>(it - tail.begin()) - 1;
}

// Pareto continuation past the table: P(X >= j) ~ tail_anchor ((j-1/2)/(anchor-1/2))^{-index}
std::uint64_t pareto_tail(double u, double tail_anchor, std::uint64_t anchor, double index) {
    double v = u / tail_anchor;
    double x = (static_cast<double>(anchor) - 0.5) * std::pow(v, -1.0 / index);
    if (!(x < static_cast<double>(kHugeCount))) return kHugeCount;
    return std::max<std::uint64_t>(anchor, static_cast<std::uint64_t>(std::floor(x + 0.5)));
}

std::vector<std::vector<double>> stirling_first(int n) {
    std::vector<std::vector<double>> s(n + 1, std::vector<double>(n + 1, 0.0));
    s[0][0] = 1.0;
    for (int i = 0; i < n; ++i)
        for (int j = 1; j <= i + 1; ++j) s[i + 1][j] = s[i][j - 1] - i * s[i][j];
    return s;
}

double falling(std::uint64_t k, int order) {
    double r = 1.0;
    for (int i = 0; i < order; ++i) r *= static_cast<double>(k) - i;
    return r;
}

}  // namespace

struct OffspringLaw::Impl {
    Family family = Family::Finite;
    std::vector<double> pmf;  // Finite
    double a = 0.0;           // Geometric
    double alpha = 0.0, C = 0.0, p0 = 0.0;
    std::uint64_t k_max = 0;
    std::vector<double> tail;  // Finite: size K+1 ending in 0; PowerTail: k = 0..k_max+1
    double mean = 0.0, variance = 0.0;
    std::vector<special::Polylog> li;  // Li_{alpha+1-j}
    mutable std::once_flag biased_once;
    mutable std::shared_ptr<const std::vector<double>> biased_tail;
};

OffspringLaw OffspringLaw::finite(std::vector<double> pmf) {
    if (pmf.empty()) throw DomainError("finite law: empty pmf");
    double total = 0.0;
    for (double p : pmf) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("finite law: negative or non-finite mass");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("finite law: masses do not sum to 1");
    auto impl = std::make_shared<Impl>();
    impl->family = Family::Finite;
    while (pmf.size() > 1 && pmf.back() == 0.0) pmf.pop_back();
    impl->pmf = std::move(pmf);
    const auto& p = impl->pmf;
    impl->tail.assign(p.size() + 1, 0.0);
    for (std::size_t k = p.size(); k-- > 0;) impl->tail[k] = impl->tail[k + 1] + p[k];
    impl->tail[0] = 1.0;
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        m1 += k * p[k];
        m2 += static_cast<double>(k) * k * p[k];
    }
    impl->mean = m1;
    impl->variance = m2 - m1 * m1;
    return OffspringLaw(impl);
}

OffspringLaw OffspringLaw::geometric(double a) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("geometric law: need 0 < a < 1");
    auto impl = std::make_shared<Impl>();
    impl->family = Family::Geometric;
    impl->a = a;
    impl->mean = a / (1.0 - a);
    impl->variance = a / ((1.0 - a) * (1.0 - a));
    return OffspringLaw(impl);
}

OffspringLaw OffspringLaw::power_tail(double alpha, double p0, std::uint64_t k_max) {
    if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("power-tail law: need 1 < alpha < 2");
    if (!(p0 >= 0.0 && p0 < 1.0)) throw DomainError("power-tail law: need 0 <= p0 < 1");
    if (k_max < 16) throw DomainError("power-tail law: k_max too small");
    auto impl = std::make_shared<Impl>();
    impl->family = Family::PowerTail;
    impl->alpha = alpha;
    impl->p0 = p0;
    impl->k_max = k_max;
    const double zeta_a1 = special::zeta(alpha + 1.0);
    impl->C = (1.0 - p0) / zeta_a1;
    impl->mean = impl->C * special::zeta(alpha);
    impl->variance = kInf;

    auto& t = impl->tail;
    t.resize(k_max + 2);
    t[k_max + 1] = impl->C * special::hurwitz_zeta(alpha + 1.0, static_cast<double>(k_max + 1));
    for (std::uint64_t k = k_max; k >= 1; --k)
        t[k] = t[k + 1] + impl->C * std::pow(static_cast<double>(k), -(alpha + 1.0));
    t[0] = 1.0;

    for (int j = 0; j <= kMaxOrder; ++j) impl->li.emplace_back(alpha + 1.0 - j);
    return OffspringLaw(impl);
}

OffspringLaw OffspringLaw::power_tail_with_mean(double alpha, double mean, std::uint64_t k_max) {
    if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("power-tail law: need 1 < alpha < 2");
    // mean = (1-p0) zeta(alpha)/zeta(alpha+1) is linear in p0
    double p0 = 1.0 - mean * special::zeta(alpha + 1.0) / special::zeta(alpha);
    if (!(mean > 0.0) || !(p0 >= 0.0 && p0 < 1.0))
        throw DomainError("power-tail law: mean out of reach for this alpha");
    return power_tail(alpha, p0, k_max);
}

Family OffspringLaw::family() const { return impl_->family; }
double OffspringLaw::geometric_a() const { return impl_->a; }
double OffspringLaw::alpha() const { return impl_->alpha; }
double OffspringLaw::power_constant() const { return impl_->C; }
std::uint64_t OffspringLaw::k_max() const { return impl_->k_max; }
const std::vector<double>& OffspringLaw::finite_pmf() const { return impl_->pmf; }
double OffspringLaw::mean() const { return impl_->mean; }
double OffspringLaw::variance() const { return impl_->variance; }
bool OffspringLaw::finite_variance() const { return impl_->family != Family::PowerTail; }
double OffspringLaw::tail_index() const { return finite_variance() ? 2.0 : impl_->alpha; }

double OffspringLaw::pmf(std::uint64_t k) const {
    const Impl& m = *impl_;
    switch (m.family) {
        case Family::Finite: return k < m.pmf.size() ? m.pmf[k] : 0.0;
        case Family::Geometric: return (1.0 - m.a) * std::pow(m.a, static_cast<double>(k));
        case Family::PowerTail:
            return k == 0 ? m.p0 : m.C * std::pow(static_cast<double>(k), -(m.alpha + 1.0));
    }
    return 0.0;
}

double OffspringLaw::tail(std::uint64_t k) const {
    const Impl& m = *impl_;
    switch (m.family) {
        case Family::Finite: return k < m.tail.size() ? m.tail[k] : 0.0;
        case Family::Geometric: return std::pow(m.a, static_cast<double>(k));
        case Family::PowerTail:
            if (k < m.tail.size()) return m.tail[k];
            return m.C * special::hurwitz_zeta(m.alpha + 1.0, static_cast<double>(k));
    }
    return 0.0;
}

double OffspringLaw::gf(double s) const {
    if (s >= 1.0) return 1.0;
    const Impl& m = *impl_;
    switch (m.family) {
        case Family::Finite: {
            double r = 0.0;
            for (std::size_t k = m.pmf.size(); k-- > 0;) r = r * s + m.pmf[k];
            return r;
        }
        case Family::Geometric: return (1.0 - m.a) / (1.0 - m.a * s);
        case Family::PowerTail:
            if (s <= 0.0) return m.p0;
            return m.p0 + m.C * m.li[0](-std::log(s));
    }
    return 0.0;
}

double OffspringLaw::gf_complement(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0 - p0();
    const Impl& m = *impl_;
    switch (m.family) {
        case Family::Finite: {
            const double l1p = std::log1p(-t);
            double r = 0.0;
            for (std::size_t k = 1; k < m.pmf.size(); ++k) r -= m.pmf[k] * std::expm1(k * l1p);
            return r;
        }
        case Family::Geometric: return m.a * t / (1.0 - m.a + m.a * t);
        case Family::PowerTail: return m.C * m.li[0].complement(-std::log1p(-t));
    }
    return 0.0;
}

double OffspringLaw::gf_derivative(double s, int order) const {
    if (order < 0) throw DomainError("gf_derivative: negative order");
    if (order == 0) return gf(s);
    const Impl& m = *impl_;
    switch (m.family) {
        case Family::Finite: {
            double r = 0.0;
            for (std::size_t k = m.pmf.size(); k-- > static_cast<std::size_t>(order);)
                r = r * s + falling(k, order) * m.pmf[k];
            return r;
        }
        case Family::Geometric: {
            double fact = std::tgamma(order + 1.0);
            return (1.0 - m.a) * fact * std::pow(m.a, order) / std::pow(1.0 - m.a * s, order + 1);
        }
        case Family::PowerTail: {
            if (order > kMaxOrder) throw DomainError("gf_derivative: order too large");
            if (s <= 0.0) return std::tgamma(order + 1.0) * pmf(order);
            if (s >= 1.0) return order == 1 ? m.mean : kInf;
            static const auto stirling = stirling_first(kMaxOrder);
            const double lambda = -std::log(s);
            double r = 0.0;
            for (int j = 1; j <= order; ++j) r += stirling[order][j] * m.li[j](lambda);
            return m.C * r / std::pow(s, order);
        }
    }
    return 0.0;
}

OffspringLaw OffspringLaw::tilted(double q) const {
    if (!(q > 0.0 && q <= 1.0)) return finite({1.0});
    const Impl& m = *impl_;
    if (m.family == Family::Geometric) return geometric(m.a * q);
    std::vector<double> h;
    if (m.family == Family::Finite) {
        for (std::size_t k = 0; k < m.pmf.size(); ++k) h.push_back(m.pmf[k] * std::pow(q, static_cast<double>(k) - 1.0));
    } else {
        h.push_back(m.p0 / q);
        for (std::uint64_t k = 1;; ++k) {
            double v = pmf(k) * std::pow(q, static_cast<double>(k) - 1.0);
            h.push_back(v);
            if (v < 1e-19 || k > 100'000'000) break;
        }
    }
    double total = 0.0;
    for (double v : h) total += v;
    for (double& v : h) v /= total;
    return finite(std::move(h));
}

std::uint64_t OffspringLaw::sample_from_uniform(double u) const {
    const Impl& m = *impl_;
    switch (m.family) {
        case Family::Finite: return invert_table(m.tail, u);
        case Family::Geometric: {
            double x = std::floor(std::log(u) / std::log(m.a));
            return x < static_cast<double>(kHugeCount) ? static_cast<std::uint64_t>(x) : kHugeCount;
        }
        case Family::PowerTail: {
            if (u >= m.tail.back()) return invert_table(m.tail, u);
            return pareto_tail(u, m.tail.back(), m.k_max + 1, m.alpha);
        }
    }
    return 0;
}

std::uint64_t OffspringLaw::sample_positive_from_uniform(double u) const {
    double s1 = tail(1);
    if (s1 <= 0.0) throw DomainError("sample_positive: law has no positive mass");
    return std::max<std::uint64_t>(1, sample_from_uniform(u * s1));
}

std::string OffspringLaw::describe() const {
    std::ostringstream os;
    os.precision(12);
    const Impl& m = *impl_;
    switch (m.family) {
        case Family::Finite:
            os << "finite[";
            for (std::size_t k = 0; k < m.pmf.size(); ++k) os << (k ? "," : "") << m.pmf[k];
            os << "]";
            break;
        case Family::Geometric: os << "geometric(a=" << m.a << ")"; break;
        case Family::PowerTail: os << "power_tail(alpha=" << m.alpha << ",p0=" << m.p0 << ")"; break;
    }
    return os.str();
}

struct SizeBiasedLaw::Impl {
    OffspringLaw base;
    std::shared_ptr<const std::vector<double>> tail;  // P(xi* >= k), k = 0..K
    double mean = 0.0;
};

SizeBiasedLaw::SizeBiasedLaw(OffspringLaw base) {
    const double mu = base.mean();
    if (!(mu > 0.0)) throw DomainError("size-biased law: base mean must be positive");
    const auto& bm = *base.impl_;
    std::call_once(bm.biased_once, [&] {
        std::vector<double> t;
        switch (bm.family) {
            case Family::Finite: {
                const auto& p = bm.pmf;
                t.assign(p.size() + 1, 0.0);
                for (std::size_t k = p.size(); k-- > 1;) t[k] = t[k + 1] + k * p[k] / mu;
                t[0] = t[1] = 1.0;
                break;
            }
            case Family::Geometric: {
                const double a = bm.a;
                t.push_back(1.0);
                for (std::uint64_t k = 1;; ++k) {
                    double v = std::pow(a, static_cast<double>(k) - 1.0) * (k * (1.0 - a) + a);
                    t.push_back(k == 1 ? 1.0 : v);
                    if (v < 1e-300) break;
                }
                t.push_back(0.0);
                break;
            }
            case Family::PowerTail: {
                const std::uint64_t km = bm.k_max;
                const double alpha = bm.alpha, scale = bm.C / mu;
                t.resize(km + 2);
                t[km + 1] = scale * special::hurwitz_zeta(alpha, static_cast<double>(km + 1));
                for (std::uint64_t k = km; k >= 1; --k)
                    t[k] = t[k + 1] + scale * std::pow(static_cast<double>(k), -alpha);
                t[0] = t[1] = 1.0;
                break;
            }
        }
        bm.biased_tail = std::make_shared<const std::vector<double>>(std::move(t));
    });
    const double mean = base.finite_variance() ? (base.variance() + mu * mu) / mu : kInf;
    auto tail = bm.biased_tail;
    impl_ = std::make_shared<const Impl>(Impl{std::move(base), std::move(tail), mean});
}

const OffspringLaw& SizeBiasedLaw::base() const { return impl_->base; }

double SizeBiasedLaw::pmf(std::uint64_t k) const {
    return static_cast<double>(k) * impl_->base.pmf(k) / impl_->base.mean();
}

double SizeBiasedLaw::tail(std::uint64_t k) const {
    const auto& t = *impl_->tail;
    if (k < t.size()) return t[k];
    const OffspringLaw& b = impl_->base;
    switch (b.family()) {
        case Family::Finite: return 0.0;
        case Family::Geometric: {
            double a = b.geometric_a();
            return std::pow(a, static_cast<double>(k) - 1.0) * (k * (1.0 - a) + a);
        }
        case Family::PowerTail:
            return b.power_constant() / b.mean() * special::hurwitz_zeta(b.alpha(), static_cast<double>(k));
    }
    return 0.0;
}

double SizeBiasedLaw::mean() const { return impl_->mean; }

std::uint64_t SizeBiasedLaw::sample_from_uniform(double u) const {
    const auto& t = *impl_->tail;
    const OffspringLaw& b = impl_->base;
    if (b.family() == Family::PowerTail && u < t.back())
        return pareto_tail(u, t.back(), b.k_max() + 1, b.alpha() - 1.0);
    return std::max<std::uint64_t>(1, invert_table(t, u));
}

ScalingSequence::ScalingSequence(const OffspringLaw& base) {
    if (base.finite_variance()) throw DomainError("scaling sequence: base law has finite variance");
    index_ = base.alpha() - 1.0;
    // zeta(alpha, x) x^{alpha-1} -> 1/(alpha-1)
    c_prime_ = base.power_constant() / (base.mean() * index_);
}

ScalingSequence::ScalingSequence(double c_prime, double index) : c_prime_(c_prime), index_(index) {
    if (!(c_prime > 0.0 && index > 0.0)) throw DomainError("scaling sequence: need c' > 0, index > 0");
}

double ScalingSequence::operator()(double n) const { return std::pow(c_prime_ * n, 1.0 / index_); }

}  // namespace gwe
