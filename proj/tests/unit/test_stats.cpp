#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "gwe/distributions.hpp"
#include "gwe/errors.hpp"
#include "gwe/stats.hpp"
#include "reference.hpp"

using namespace gwe;
using namespace gwe::stats;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SampleSet pareto_sample(double index, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    SampleSet s;
    s.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) s.add(ref::pareto(index, ref::uniform(g)));
    return s;
}

std::vector<std::uint64_t> geometric_counts(double a, std::size_t n, std::size_t bins, std::uint64_t seed) {
    auto law = OffspringLaw::geometric(a);
    Engine g(seed);
    std::vector<std::uint64_t> c(bins, 0);
    for (std::size_t i = 0; i < n; ++i) ++c[std::min<std::uint64_t>(law.sample(g), bins - 1)];
    return c;
}

std::vector<double> geometric_pmf(double a, std::size_t bins) {
    std::vector<double> e(bins);
    for (std::size_t k = 0; k + 1 < bins; ++k) e[k] = (1 - a) * std::pow(a, k);
    e[bins - 1] = std::pow(a, bins - 1);
    return e;
}

}  // namespace

TEST_CASE("Hill estimator on exact Pareto samples") {
    auto s = pareto_sample(0.5, 100'000, 1);
    auto h = hill_tail_index(s, 25'000);
    CHECK(std::abs(h.index - 0.5) < 0.01);
    CHECK(h.se == doctest::Approx(h.index / std::sqrt(25'000.0)).epsilon(1e-12));
    CHECK_FALSE(h.drifting);

    auto d = hill_tail_index(s);
    CHECK(d.k == 316);
    CHECK(std::abs(d.index - 0.5) < 3.0 * d.se);
    CHECK(std::isfinite(d.index_half));
    CHECK(std::isfinite(d.index_double));
}

TEST_CASE("Hill calibration at k = sqrt(N)") {
    for (double theta : {0.3, 0.5, 0.9}) {
        double sum = 0.0;
        const int reps = 8;
        for (int r = 0; r < reps; ++r) sum += hill_tail_index(pareto_sample(theta, 1'000'000, 100 + r)).index;
        CAPTURE(theta);
        CHECK(std::abs(sum / reps - theta) < 0.02);
    }
}

TEST_CASE("Hill flags a light tail") {
    std::mt19937_64 g(2);
    SampleSet s;
    for (int i = 0; i < 100'000; ++i) s.add(-std::log(ref::uniform(g)));
    auto h = hill_tail_index(s);
    // 1/index grows with k: no plateau
    CHECK(h.index_half > h.index);
    CHECK(h.index > h.index_double);
    CHECK(h.drifting);
}

TEST_CASE("Hill preconditions and censoring") {
    CHECK_THROWS_AS(hill_tail_index(pareto_sample(0.5, 99, 3)), InsufficientData);
    auto s = pareto_sample(0.5, 1000, 3);
    CHECK_THROWS_AS(hill_tail_index(s, 500), InsufficientData);
    CHECK_THROWS_AS(hill_tail_index(s, 1), InsufficientData);

    // censored lower bounds in the top order statistics lower the uncensored count, not the log spacings
    auto c = pareto_sample(0.5, 100'000, 4);
    std::vector<std::size_t> idx(c.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return c.values[a] > c.values[b]; });
    c.censored.assign(c.size(), false);
    for (int i = 0; i < 20; ++i) c.censored[idx[i]] = true;
    auto hc = hill_tail_index(c);
    auto hu = hill_tail_index(pareto_sample(0.5, 100'000, 4));
    CHECK(hc.index == doctest::Approx(hu.index * (hu.k - 20.0) / hu.k).epsilon(1e-12));
}

TEST_CASE("log-log slope") {
    std::vector<double> levels{4, 8, 16, 32, 64};
    std::vector<std::vector<double>> v;
    for (double n : levels) v.push_back(std::vector<double>(7, n * n));
    auto s = loglog_slope(levels, v);
    CHECK(s.slope == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s.se == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    std::mt19937_64 g(5);
    std::vector<std::vector<double>> noisy;
    for (double n : levels) {
        noisy.emplace_back();
        for (int r = 0; r < 400; ++r) noisy.back().push_back(std::pow(n, 1.5) * std::exp(ref::uniform(g) - 0.5));
    }
    auto ns = loglog_slope(levels, noisy);
    CHECK(ns.se > 0.0);
    CHECK(std::abs(ns.slope - 1.5) < 4.0 * ns.se);

    CHECK_THROWS_AS(loglog_slope({4, 8, 16}, {{1}, {2}, {3}}), InsufficientLevels);
    auto cens = v;
    for (auto& x : cens.back()) x = kInf;
    CHECK_THROWS_AS(loglog_slope(levels, cens), CensoringTooHigh);
    // a censored minority sits above the median and leaves it finite
    auto few = v;
    few.back()[0] = kInf;
    few.back()[1] = kInf;
    CHECK(std::isfinite(loglog_slope(levels, few).slope));
}

TEST_CASE("empirical Laplace transform") {
    SampleSet zeros = SampleSet::uncensored(std::vector<double>(100, 0.0));
    for (double s : {0.5, 1.0, 2.0}) CHECK(empirical_laplace(zeros, s) == 1.0);

    std::mt19937_64 g(6);
    SampleSet st;
    for (int i = 0; i < 1'000'000; ++i) {
        const double u1 = ref::uniform(g), u2 = ref::uniform(g);
        st.add(ref::positive_stable(0.5, u1, u2));
    }
    for (double s : {0.5, 1.0, 2.0}) CHECK(std::abs(empirical_laplace(st, s) - std::exp(-std::sqrt(s))) < 0.01);

    SampleSet c = SampleSet::uncensored(std::vector<double>(100, 1.0));
    c.censored.assign(100, false);
    c.censored[0] = c.censored[1] = true;
    CHECK_THROWS_AS(empirical_laplace(c, 1.0), CensoringTooHigh);
}

TEST_CASE("censored values never move mean-based outputs") {
    std::mt19937_64 g(7);
    SampleSet base;
    for (int i = 0; i < 1000; ++i) base.add(ref::uniform(g) * 3.0);
    SampleSet with = base;
    for (int i = 0; i < 5; ++i) with.add(1e9 * (i + 1), true);
    for (double s : {0.1, 1.0, 4.0}) CHECK(empirical_laplace(with, s) == empirical_laplace(base, s));
    CHECK(with.uncensored_count() == base.size());
}

TEST_CASE("estimators ignore input order") {
    auto s = pareto_sample(0.7, 20'000, 8);
    s.censored.assign(s.size(), false);
    s.censored[3] = s.censored[77] = true;
    auto t = s;
    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
    for (std::size_t i = 0; i < perm.size(); ++i) {
        t.values[i] = s.values[perm[i]];
        t.censored[i] = s.censored[perm[i]];
    }
    auto a = hill_tail_index(s), b = hill_tail_index(t);
    CHECK(a.index == b.index);
    CHECK(a.index_double == b.index_double);
    // Laplace sums in input order, so it agrees to rounding only
    CHECK(empirical_laplace(s, 0.3) == doctest::Approx(empirical_laplace(t, 0.3)).epsilon(1e-13));

    std::vector<double> levels{2, 4, 8, 16};
    std::vector<std::vector<double>> v(4), w(4);
    std::mt19937_64 g(10);
    for (int i = 0; i < 4; ++i)
        for (int r = 0; r < 50; ++r) v[i].push_back(levels[i] * (1.0 + ref::uniform(g)));
    w = v;
    for (auto& row : w) std::reverse(row.begin(), row.end());
    CHECK(loglog_slope(levels, v).slope == loglog_slope(levels, w).slope);
}

TEST_CASE("chi-square goodness of fit") {
    const auto e = geometric_pmf(1.0 / 3.0, 20);
    CHECK(chi_square_gof(geometric_counts(1.0 / 3.0, 100'000, 20, 11), e).p_value > 0.01);
    CHECK(chi_square_gof(geometric_counts(0.5, 100'000, 20, 12), e).p_value < 1e-6);

    // perfect agreement and bin merging
    std::vector<double> pmf{0.5, 0.3, 0.1999, 0.0001};
    std::vector<std::uint64_t> obs{500, 300, 200, 0};
    auto c = chi_square_gof(obs, pmf);
    CHECK(c.bins == 3);
    CHECK(c.dof == 2);
    CHECK(c.statistic == doctest::Approx(0.0).scale(1.0).epsilon(1e-3));

    CHECK_THROWS_AS(chi_square_gof({10, 0}, {1.0, 0.0}), DegenerateBins);
    CHECK_THROWS_AS(chi_square_gof({3, 1}, {0.5, 0.5}), DegenerateBins);
}

TEST_CASE("chi-square p-values are uniform under the null") {
    const std::vector<double> pmf{0.1, 0.2, 0.3, 0.25, 0.15};
    std::mt19937_64 g(13);
    std::vector<double> pv;
    for (int run = 0; run < 300; ++run) {
        std::vector<std::uint64_t> obs(pmf.size(), 0);
        std::discrete_distribution<int> d(pmf.begin(), pmf.end());
        for (int i = 0; i < 100'000; ++i) ++obs[d(g)];
        pv.push_back(chi_square_gof(obs, pmf).p_value);
    }
    CHECK(ks_uniform_pvalue(pv) > 0.01);
}

TEST_CASE("Kolmogorov tools") {
    CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.0494).epsilon(2e-3));
    CHECK(kolmogorov_survival(0.5) == doctest::Approx(0.9639).epsilon(1e-3));
    CHECK(kolmogorov_survival(0.1) == 1.0);
    CHECK(std::abs(kolmogorov_survival(1.0 - 1e-9) - kolmogorov_survival(1.0 + 1e-9)) < 1e-8);
    CHECK(kolmogorov_survival(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-10));
    CHECK(kolmogorov_survival(3.0) < 1e-7);

    std::mt19937_64 g(14);
    std::vector<double> u, sq;
    for (int i = 0; i < 5000; ++i) {
        u.push_back(ref::uniform(g));
        sq.push_back(u.back() * u.back());
    }
    CHECK(ks_uniform_pvalue(u) > 0.01);
    CHECK(ks_uniform_pvalue(sq) < 1e-6);
    CHECK(ks_statistic_uniform({0.5}) == doctest::Approx(0.5));

    std::vector<double> a(u.begin(), u.begin() + 2500), b(u.begin() + 2500, u.end());
    CHECK(ks_two_sample_pvalue(a, b) > 0.01);
    for (auto& x : b) x += 0.1;
    CHECK(ks_two_sample_pvalue(a, b) < 1e-6);
}

TEST_CASE("quantiles and line fits") {
    CHECK(quantile({4, 1, 3, 2}, 0.5) == 2.5);
    CHECK(quantile({1, 2, 3, 4}, 0.25) == 1.75);
    CHECK(median({1, kInf, kInf}) == kInf);
    CHECK(median({1, 2, kInf}) == 2.0);

    auto f = linear_fit({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.slope_se == doctest::Approx(0.0).scale(1.0));
}
