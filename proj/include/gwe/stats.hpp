#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gwe::stats {

// Censored values are lower bounds (budget ran out before the event).
struct SampleSet {
    std::vector<double> values;
    std::vector<bool> censored;  // empty means nothing censored
    std::string regime;
    std::uint64_t level = 0;
    std::uint64_t replicas = 0;

    static SampleSet uncensored(std::vector<double> v);
    void add(double v, bool is_censored = false);
    std::size_t size() const { return values.size(); }
    bool is_censored(std::size_t i) const { return !censored.empty() && censored[i]; }
    std::size_t uncensored_count() const;
};

struct HillEstimate {
    double index = 0.0;
    double se = 0.0;
    std::size_t k = 0;
    double index_half = 0.0;    // at k/2
    double index_double = 0.0;  // at 2k, NaN when 2k >= N/2
    bool drifting = false;      // monotone in k beyond sampling noise
};
// k = 0 picks floor(sqrt(N)).
HillEstimate hill_tail_index(const SampleSet& samples, std::size_t k = 0);

struct Slope {
    double slope = 0.0;
    double se = 0.0;
    double intercept = 0.0;
};
// values[i][r]: replica r at level i; +inf marks a censored replica.
Slope loglog_slope(const std::vector<double>& levels, const std::vector<std::vector<double>>& values);

double empirical_laplace(const SampleSet& samples, double s);

struct ChiSquare {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 0.0;
    std::size_t bins = 0;
};
// expected_pmf[i] for bin i; the last bin should carry the remaining tail mass.
ChiSquare chi_square_gof(const std::vector<std::uint64_t>& observed, const std::vector<double>& expected_pmf);

// Asymptotic Kolmogorov distribution, P(sqrt(n) D > x).
double kolmogorov_survival(double x);
double ks_statistic_uniform(std::vector<double> u);
double ks_uniform_pvalue(std::vector<double> u);
double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b);

double quantile(std::vector<double> v, double p);
double median(std::vector<double> v);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace gwe::stats
