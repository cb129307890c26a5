#include "gwe/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

#include "gwe/errors.hpp"

namespace gwe::stats {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Ranked {
    double value;
    bool censored;
};

// Hill estimate from the top k of a descending list; censored values count in the
// log-spacings but not in the numerator.
std::pair<double, double> hill_at(const std::vector<Ranked>& desc, std::size_t k) {
    const double threshold = desc[k].value;
    double sum = 0.0;
    std::size_t events = 0;
    for (std::size_t i = 0; i < k; ++i) {
        sum += std::log(desc[i].value / threshold);
        if (!desc[i].censored) ++events;
    }
    if (!(sum > 0.0) || events == 0) throw InsufficientData("hill: degenerate top order statistics");
    const double est = static_cast<double>(events) / sum;
    return {est, est / std::sqrt(static_cast<double>(events))};
}

}  // namespace

SampleSet SampleSet::uncensored(std::vector<double> v) {
    SampleSet s;
    s.values = std::move(v);
    return s;
}

void SampleSet::add(double v, bool is_censored) {
    if (is_censored && censored.empty()) censored.assign(values.size(), false);
    values.push_back(v);
    if (!censored.empty()) censored.push_back(is_censored);
}

std::size_t SampleSet::uncensored_count() const {
    if (censored.empty()) return values.size();
    return static_cast<std::size_t>(std::count(censored.begin(), censored.end(), false));
}

HillEstimate hill_tail_index(const SampleSet& samples, std::size_t k) {
    if (samples.uncensored_count() < 100) throw InsufficientData("hill: fewer than 100 uncensored samples");
    std::vector<Ranked> desc;
    desc.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!(samples.values[i] > 0.0)) throw DomainError("hill: values must be positive");
        desc.push_back({samples.values[i], samples.is_censored(i)});
    }
    // ties broken by the censoring flag so the result ignores input order
    std::sort(desc.begin(), desc.end(), [](const Ranked& a, const Ranked& b) {
        return a.value != b.value ? a.value > b.value : a.censored > b.censored;
    });
    const std::size_t n = desc.size();
    if (k == 0) k = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    if (k < 2 || 2 * k >= n) throw InsufficientData("hill: k must satisfy 2 <= k < N/2");
    HillEstimate h;
    h.k = k;
    std::tie(h.index, h.se) = hill_at(desc, k);
    auto [half, se_half] = hill_at(desc, std::max<std::size_t>(k / 2, 1));
    h.index_half = half;
    h.index_double = kNaN;
    if (4 * k < n) {
        auto [dbl, se_dbl] = hill_at(desc, 2 * k);
        h.index_double = dbl;
        const bool monotone = (half < h.index && h.index < dbl) || (half > h.index && h.index > dbl);
        h.drifting = monotone && std::abs(half - dbl) > 2.0 * std::hypot(se_half, se_dbl);
    }
    return h;
}

Slope loglog_slope(const std::vector<double>& levels, const std::vector<std::vector<double>>& values) {
    if (levels.size() < 4 || values.size() != levels.size())
        throw InsufficientLevels("loglog_slope: need at least 4 levels");
    const std::size_t reps = values.front().size();
    for (const auto& v : values)
        if (v.size() != reps || reps == 0) throw DomainError("loglog_slope: ragged replica table");
    std::vector<double> lx;
    for (double n : levels) lx.push_back(std::log(n));

    auto fit_without = [&](std::size_t drop) {
        std::vector<double> ly;
        for (const auto& v : values) {
            std::vector<double> w;
            w.reserve(reps);
            for (std::size_t r = 0; r < reps; ++r)
                if (r != drop) w.push_back(v[r]);
            const double m = median(std::move(w));
            if (!std::isfinite(m) || !(m > 0.0)) throw CensoringTooHigh("loglog_slope: median is censored");
            ly.push_back(std::log(m));
        }
        return linear_fit(lx, ly);
    };
    LinearFit full = fit_without(reps);
    Slope s{full.slope, 0.0, full.intercept};
    if (reps > 1) {
        std::vector<double> jk;
        for (std::size_t r = 0; r < reps; ++r) jk.push_back(fit_without(r).slope);
        const double mean = std::accumulate(jk.begin(), jk.end(), 0.0) / static_cast<double>(reps);
        double ss = 0.0;
        for (double v : jk) ss += (v - mean) * (v - mean);
        s.se = std::sqrt(ss * static_cast<double>(reps - 1) / static_cast<double>(reps));
    }
    return s;
}

double empirical_laplace(const SampleSet& samples, double s) {
    const std::size_t good = samples.uncensored_count();
    if (samples.size() == 0 || static_cast<double>(good) < 0.99 * static_cast<double>(samples.size()))
        throw CensoringTooHigh("empirical_laplace: uncensored fraction below 99%");
    std::vector<double> terms;
    terms.reserve(good);
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (!samples.is_censored(i)) terms.push_back(std::exp(-s * samples.values[i]));
    std::sort(terms.begin(), terms.end());
    return std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(good);
}

ChiSquare chi_square_gof(const std::vector<std::uint64_t>& observed, const std::vector<double>& expected_pmf) {
    if (observed.size() != expected_pmf.size() || observed.empty())
        throw DegenerateBins("chi_square_gof: observed and expected differ in length");
    const double n = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::uint64_t{0}));
    std::vector<double> e_bins, o_bins;
    double e_acc = 0.0, o_acc = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        e_acc += n * expected_pmf[i];
        o_acc += static_cast<double>(observed[i]);
        if (e_acc >= 5.0) {
            e_bins.push_back(e_acc);
            o_bins.push_back(o_acc);
            e_acc = o_acc = 0.0;
        }
    }
    if (e_acc > 0.0 || o_acc > 0.0) {
        if (e_bins.empty()) throw DegenerateBins("chi_square_gof: no bin reaches expected count 5");
        e_bins.back() += e_acc;
        o_bins.back() += o_acc;
    }
    if (e_bins.size() < 2) throw DegenerateBins("chi_square_gof: fewer than two bins after merging");
    ChiSquare c;
    for (std::size_t i = 0; i < e_bins.size(); ++i) c.statistic += (o_bins[i] - e_bins[i]) * (o_bins[i] - e_bins[i]) / e_bins[i];
    c.bins = e_bins.size();
    c.dof = static_cast<int>(e_bins.size()) - 1;
    c.p_value = boost::math::gamma_q(0.5 * c.dof, 0.5 * c.statistic);
    return c;
}

double kolmogorov_survival(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 1.0) {
        // Jacobi theta form; the alternating series converges slowly here
        const double c = std::numbers::pi * std::numbers::pi / (8.0 * x * x);
        double sum = 0.0;
        for (int k = 1; k <= 20; ++k) sum += std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * c);
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / x * sum, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_statistic_uniform(std::vector<double> u) {
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        d = std::max(d, static_cast<double>(i + 1) / n - u[i]);
        d = std::max(d, u[i] - static_cast<double>(i) / n);
    }
    return d;
}

double ks_uniform_pvalue(std::vector<double> u) {
    if (u.empty()) throw InsufficientData("ks: empty sample");
    const double n = static_cast<double>(u.size());
    const double d = ks_statistic_uniform(std::move(u));
    const double sn = std::sqrt(n);
    return kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
}

double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InsufficientData("ks: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d);
}

double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw InsufficientData("quantile: empty sample");
    std::sort(v.begin(), v.end());
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    if (v[hi] == v[lo]) return v[lo];
    if (std::isinf(v[hi])) return h == static_cast<double>(lo) ? v[lo] : v[hi];
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw InsufficientData("linear_fit: need two points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - f.intercept - f.slope * x[i];
            rss += r * r;
        }
        f.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    return f;
}

}  // namespace gwe::stats
