#include <doctest.h>

#include <cmath>
#include <set>

#include "gwe/distributions.hpp"
#include "gwe/errors.hpp"
#include "gwe/special.hpp"
#include "gwe/stats.hpp"
#include "reference.hpp"

using namespace gwe;

namespace {
// mpmath, 40 digits
constexpr double kZeta25 = 1.341487257250917179756769693348612136623;
constexpr double kZeta15 = 2.612375348685488343348567567924071630571;
constexpr double kHurwitz25at10 = 0.02272869919453454052101727780507292847579;
constexpr double kZetaMinusHalf = -0.2078862249773545660173067253970493022263;
constexpr double kPowerC = 0.3727206481443885874575212162111794712185;  // p0 = 0.5, alpha = 1.5
constexpr double kPowerMean = 0.9736862331584783500348717098202031857136;
constexpr double kTunedP0 = 0.7432437766024060675460280528606067745688;  // mean 0.5
constexpr double kTunedCprime = 0.7655867679988531244993520081366024978749;

struct GfPoint {
    double s, f, f1, f2;
};
constexpr GfPoint kPowerGf[] = {
    {0.5, 0.7068589454419630639901747114279852591626, 0.4657793187692142353158548510468934618122,
     0.2702816612577472312128780090824078210384},
    {0.9, 0.9245299457917672494142704677527262194275, 0.6685939719516879303647211766994318414063,
     1.107814068365373800264242200162999440299},
    {0.999, 0.9990534297076097115379486735842499470519, 0.93337177244277654004832250375941963726,
     19.44794660923996517600065447772446303683},
    {0.999999, 0.9999990271938486758387363737725135804699, 0.9723664892029147584831190367311913035269,
     659.1146314586446447666595857969915643038},
};

const OffspringLaw& heavy() {
    static const OffspringLaw law = OffspringLaw::power_tail(1.5, 0.5, 100'000);
    return law;
}
}  // namespace

TEST_CASE("zeta functions against frozen high-precision values") {
    CHECK(special::zeta(2.5) == doctest::Approx(kZeta25).epsilon(1e-13));
    CHECK(special::zeta(1.5) == doctest::Approx(kZeta15).epsilon(1e-13));
    CHECK(special::hurwitz_zeta(2.5, 10.0) == doctest::Approx(kHurwitz25at10).epsilon(1e-13));
    CHECK(special::zeta(-0.5) == doctest::Approx(kZetaMinusHalf).epsilon(1e-12));
    CHECK(special::zeta(2.5) == doctest::Approx(ref::zeta(2.5)).epsilon(1e-12));
    CHECK(special::hurwitz_zeta(1.5, 1000.5) == doctest::Approx(ref::hurwitz(1.5, 1000.5)).epsilon(1e-12));
}

TEST_CASE("pmf examples") {
    CHECK(OffspringLaw::geometric(2.0 / 3.0).pmf(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(std::abs(heavy().pmf(1) - kPowerC) < 1e-12);
    CHECK(std::abs(heavy().pmf(1) - 0.5 / ref::zeta(2.5)) < 1e-12);
    CHECK(OffspringLaw::finite({0.2, 0.3, 0.5}).pmf(2) == 0.5);
    CHECK(OffspringLaw::finite({0.2, 0.3, 0.5}).pmf(7) == 0.0);
}

TEST_CASE("normalization of every family") {
    for (const auto& law : {OffspringLaw::finite({0.2, 0.3, 0.5}), OffspringLaw::geometric(0.3),
                            OffspringLaw::geometric(2.0 / 3.0), heavy()}) {
        for (std::uint64_t cut : {1, 10, 1000, 200000}) {
            long double s = 0.0L;
            for (std::uint64_t k = cut; k-- > 0;) s += law.pmf(k);
            CHECK(std::abs(static_cast<double>(s) + law.tail(cut) - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("power-tail tail beyond the table uses the analytic remainder") {
    const double c = heavy().power_constant();
    for (double k : {100001.0, 3e6, 1e9})
        CHECK(heavy().tail(static_cast<std::uint64_t>(k)) == doctest::Approx(c * ref::hurwitz(2.5, k)).epsilon(1e-10));
}

TEST_CASE("mean tuning for power tails") {
    auto law = OffspringLaw::power_tail_with_mean(1.5, 0.5);
    CHECK(law.mean() == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(std::abs(law.p0() - kTunedP0) < 1e-12);
    CHECK(heavy().mean() == doctest::Approx(kPowerMean).epsilon(1e-12));
    CHECK(std::isinf(heavy().variance()));
    CHECK(heavy().tail_index() == 1.5);
    CHECK_THROWS_AS(OffspringLaw::power_tail_with_mean(1.5, 3.0), DomainError);
    CHECK_THROWS_AS(OffspringLaw::power_tail(2.0, 0.5), DomainError);
    CHECK_THROWS_AS(OffspringLaw::finite({0.5, 0.4}), DomainError);
    CHECK_THROWS_AS(OffspringLaw::geometric(1.0), DomainError);
}

TEST_CASE("generating function examples") {
    for (const auto& law : {OffspringLaw::finite({0.2, 0.3, 0.5}), OffspringLaw::geometric(0.3), heavy()})
        CHECK(std::abs(law.gf(1.0) - 1.0) < 1e-12);
    CHECK(OffspringLaw::geometric(2.0 / 3.0).gf(0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(OffspringLaw::finite({0.5, 0.0, 0.5}).gf(0.5) == doctest::Approx(0.625).epsilon(1e-15));
    for (const auto& p : kPowerGf) {
        CAPTURE(p.s);
        CHECK(std::abs(heavy().gf(p.s) - p.f) < 1e-12);
        CHECK(heavy().gf_derivative(p.s, 1) == doctest::Approx(p.f1).epsilon(1e-10));
        CHECK(heavy().gf_derivative(p.s, 2) == doctest::Approx(p.f2).epsilon(1e-9));
        CHECK(std::abs(heavy().gf_complement(1.0 - p.s) - (1.0 - p.f)) < 1e-12);
    }
}

TEST_CASE("generating function derivative tends to the mean at 1") {
    auto geo = OffspringLaw::geometric(1.0 / 3.0);
    CHECK(geo.gf_derivative(1.0 - 1e-9, 1) == doctest::Approx(0.5).epsilon(1e-8));
    // power tail: f'(1) - f'(1-t) ~ t^{alpha-1}
    CHECK(std::abs(heavy().gf_derivative(1.0 - 1e-12, 1) - heavy().mean()) < 1e-5);
    CHECK(heavy().gf_derivative(1.0 - 1e-12, 1) < heavy().mean());
}

TEST_CASE("complement stays accurate for tiny arguments") {
    for (const auto& law : {OffspringLaw::finite({0.2, 0.3, 0.5}), OffspringLaw::geometric(0.3), heavy()}) {
        const double t = 1e-14;
        CHECK(law.gf_complement(t) == doctest::Approx(law.mean() * t).epsilon(1e-6));
    }
}

TEST_CASE("gf derivatives of finite and geometric laws match coefficient extraction") {
    auto fin = OffspringLaw::finite({0.1, 0.2, 0.3, 0.4});
    CHECK(fin.gf_derivative(0.5, 1) == doctest::Approx(0.2 + 2 * 0.3 * 0.5 + 3 * 0.4 * 0.25));
    CHECK(fin.gf_derivative(0.5, 3) == doctest::Approx(6 * 0.4));
    auto geo = OffspringLaw::geometric(0.4);
    for (int order = 1; order <= 4; ++order) {
        long double r = 0.0L;
        for (int k = 200; k >= order; --k) {
            long double fall = 1.0L;
            for (int i = 0; i < order; ++i) fall *= k - i;
            r += fall * geo.pmf(k) * std::pow(0.7L, k - order);
        }
        CHECK(geo.gf_derivative(0.7, order) == doctest::Approx(static_cast<double>(r)).epsilon(1e-12));
    }
}

TEST_CASE("sampling: degenerate, geometric mean, table inversion") {
    Engine g = SeedStream{1, 0}.engine();
    auto one = OffspringLaw::finite({1.0});
    for (int i = 0; i < 1000; ++i) CHECK(one.sample(g) == 0);

    auto geo = OffspringLaw::geometric(2.0 / 3.0);
    const int n = 1'000'000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(geo.sample(g));
    const double se = std::sqrt(geo.variance() / n);
    CHECK(std::abs(sum / n - 2.0) < 3.0 * se);

    for (double u : {0.999, 0.7, 0.5, 0.2, 0.01}) {
        auto k = heavy().sample_from_uniform(u);
        CHECK(heavy().tail(k + 1) <= u);
        CHECK(u < heavy().tail(k));
    }
}

TEST_CASE("size-biased geometric sampling matches k p_k / mu") {
    SizeBiasedLaw sb(OffspringLaw::geometric(2.0 / 3.0));
    Engine g = SeedStream{2, 0}.engine();
    std::vector<std::uint64_t> counts(40, 0);
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) ++counts[std::min<std::uint64_t>(sb.sample(g), 39)];
    std::vector<double> e(40);
    for (int k = 0; k < 39; ++k) e[k] = k * OffspringLaw::geometric(2.0 / 3.0).pmf(k) / 2.0;
    e[39] = sb.tail(39);
    CHECK(counts[0] == 0);
    CHECK(stats::chi_square_gof(counts, e).p_value > 0.01);
}

TEST_CASE("power-tail sampling beyond a small table") {
    auto law = OffspringLaw::power_tail(1.5, 0.5, 20);
    Engine g = SeedStream{3, 0}.engine();
    const int n = 1'000'000;
    int over50 = 0, over100 = 0;
    for (int i = 0; i < n; ++i) {
        auto k = law.sample(g);
        over50 += k >= 50;
        over100 += k >= 100;
    }
    for (auto [count, k] : {std::pair{over50, 50}, std::pair{over100, 100}}) {
        const double p = law.tail(k);
        CHECK(std::abs(count / double(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n));
    }
}

TEST_CASE("size-biased normalization and moment identity") {
    for (const auto& law : {OffspringLaw::finite({0.2, 0.3, 0.5}), OffspringLaw::geometric(1.0 / 3.0), heavy()}) {
        SizeBiasedLaw sb(law);
        long double s = 0.0L;
        for (std::uint64_t k = 5000; k-- > 0;) s += sb.pmf(k);
        CHECK(std::abs(static_cast<double>(s) + sb.tail(5000) - 1.0) < 1e-12);
        for (int t : {5, 50}) {
            double lhs = 0.0, rhs = 0.0;
            for (int k = 0; k <= t; ++k) {
                lhs += k * sb.pmf(k);
                rhs += double(k) * k * law.pmf(k);
            }
            CHECK(std::abs(lhs - rhs / law.mean()) < 1e-10);
        }
    }
    auto geo = OffspringLaw::geometric(1.0 / 3.0);
    CHECK(SizeBiasedLaw(geo).mean() - 1.0 ==
          doctest::Approx((geo.variance() + 0.25) / 0.5 - 1.0).epsilon(1e-12));
}

TEST_CASE("size-biased power tail has index alpha - 1") {
    SizeBiasedLaw sb(OffspringLaw::power_tail_with_mean(1.5, 0.5));
    Engine g = SeedStream{4, 0}.engine();
    stats::SampleSet s;
    for (int i = 0; i < 1'000'000; ++i) s.add(static_cast<double>(sb.sample(g)));
    auto h = stats::hill_tail_index(s);
    CHECK(h.index == doctest::Approx(0.5).epsilon(0.2));
    CHECK(std::abs(h.index - 0.5) < 0.1);
}

TEST_CASE("scaling sequence") {
    CHECK(ScalingSequence(1.0, 0.5)(100) == doctest::Approx(10000.0).epsilon(1e-14));
    auto law = OffspringLaw::power_tail_with_mean(1.5, 0.5);
    ScalingSequence a(law);
    CHECK(a.c_prime() == doctest::Approx(kTunedCprime).epsilon(1e-12));
    CHECK(a(1) == doctest::Approx(kTunedCprime * kTunedCprime).epsilon(1e-12));
    for (double n = 1; n < 1e6; n *= 3) CHECK(a(2 * n) > a(n));
    SizeBiasedLaw sb(law);
    for (double x : {0.5, 1.0, 2.0}) {
        const double n = 1e6;
        const double v = n * sb.tail(static_cast<std::uint64_t>(std::ceil(x * a(n))));
        CHECK(v == doctest::Approx(std::pow(x, -0.5)).epsilon(1e-3));
    }
    CHECK_THROWS_AS(ScalingSequence(OffspringLaw::geometric(0.3)), DomainError);
}

TEST_CASE("seed streams reproduce and separate") {
    SeedStream a{42, 7}, b{42, 7}, c{42, 8}, d{43, 7};
    Engine ga = a.engine(), gb = b.engine(), gc = c.engine(), gd = d.engine();
    bool differ_c = false, differ_d = false;
    for (int i = 0; i < 1000; ++i) {
        auto x = ga();
        CHECK(x == gb());
        differ_c |= x != gc();
        differ_d |= x != gd();
    }
    CHECK(differ_c);
    CHECK(differ_d);
    CHECK(a.tree_seed() == b.tree_seed());
    CHECK(a.tree_seed() != c.tree_seed());
    // uniforms from different streams look independent
    Engine g1 = SeedStream{9, 0}.engine(), g2 = SeedStream{9, 1}.engine();
    double sxy = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sxy += (uniform_open(g1) - 0.5) * (uniform_open(g2) - 0.5);
    CHECK(std::abs(sxy / n) < 4.0 / 12.0 / std::sqrt(double(n)));
}

TEST_CASE("tilted law") {
    auto geo = OffspringLaw::geometric(2.0 / 3.0);
    auto h = geo.tilted(0.5);
    CHECK(h.family() == Family::Geometric);
    CHECK(h.mean() == doctest::Approx(0.5));
    auto fin = OffspringLaw::finite({0.25, 0.25, 0.5}).tilted(0.5);
    CHECK(fin.pmf(0) == doctest::Approx(0.5));
    CHECK(fin.pmf(1) == doctest::Approx(0.25));
    CHECK(fin.pmf(2) == doctest::Approx(0.25));
}
