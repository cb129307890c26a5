#include "gwe/analytics.hpp"

#include <cmath>
#include <numbers>

#include "gwe/errors.hpp"

namespace gwe {

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Recurrent: return "RECURRENT";
        case Regime::Ballistic: return "BALLISTIC";
        case Regime::IVFE: return "IVFE";
        case Regime::FVIE: return "FVIE";
        case Regime::IVIE: return "IVIE";
        case Regime::SupBallistic: return "SUP_BALLISTIC";
        case Regime::SupSubballistic: return "SUP_SUBBALLISTIC";
        case Regime::Boundary: return "BOUNDARY";
        case Regime::CriticalUnsupported: return "CRITICAL_UNSUPPORTED";
    }
    return "?";
}

double extinction_probability(const OffspringLaw& law) {
    if (law.mean() <= 1.0) return 1.0;
    if (law.p0() <= 0.0) return 0.0;
    // f(1-eps) < 1-eps iff 1 - f(1-eps) > eps
    double eps = 1e-3;
    while (!(law.gf_complement(eps) > eps)) {
        eps *= 0.1;
        if (eps < 1e-15) throw NonConvergence("extinction: no sign change below 1");
    }
    double lo = 0.0, hi = 1.0 - eps;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        (law.gf(mid) - mid > 0.0 ? lo : hi) = mid;
    }
    double q = 0.5 * (lo + hi);
    for (int it = 0; it < 8; ++it) {
        double d = law.gf_derivative(q, 1) - 1.0;
        if (d == 0.0) break;
        double next = q - (law.gf(q) - q) / d;
        if (!(next > 0.0 && next < 1.0)) break;
        q = next;
    }
    if (!(std::abs(law.gf(q) - q) <= 1e-12)) throw NonConvergence("extinction: fixed point not resolved to 1e-12");
    return q;
}

Regime phase_classify(double mu, double beta, double fq_prime, double alpha) {
    const bool heavy = alpha < 2.0;
    auto near = [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(y)); };
    if (near(mu, 1.0)) return Regime::CriticalUnsupported;
    if (mu < 1.0) {
        if (beta <= 1.0) return Regime::Recurrent;
        if (near(beta * mu, 1.0)) return Regime::Boundary;
        if (beta * mu < 1.0) return heavy ? Regime::IVFE : Regime::Ballistic;
        return heavy ? Regime::IVIE : Regime::FVIE;
    }
    if (beta * mu <= 1.0 || near(beta * mu, 1.0)) return Regime::Recurrent;
    if (beta * fq_prime >= 1.0 || near(beta * fq_prime, 1.0)) return Regime::SupSubballistic;
    return Regime::SupBallistic;
}

Regime phase_classify(const RegimeParams& p, double alpha) { return phase_classify(p.mu, p.beta, p.fq_prime, alpha); }

double gamma_exponent(double mu, double beta, double fq_prime) {
    if (!(beta > 1.0) || mu == 1.0) throw DomainError("gamma: needs beta > 1 and mu != 1");
    return mu < 1.0 ? std::log(1.0 / mu) / std::log(beta) : std::log(1.0 / fq_prime) / std::log(beta);
}

double gamma_exponent(const RegimeParams& p) { return gamma_exponent(p.mu, p.beta, p.fq_prime); }

RegimeParams regime_params(const OffspringLaw& law, double beta) {
    RegimeParams p{law, beta};
    p.mu = law.mean();
    p.q = extinction_probability(law);
    p.fq_prime = p.mu > 1.0 ? law.gf_derivative(p.q, 1) : p.mu;
    p.regime = phase_classify(p.mu, beta, p.fq_prime, law.tail_index());
    if (beta > 1.0 && p.mu != 1.0 && p.fq_prime > 0.0) p.gamma = gamma_exponent(p.mu, beta, p.fq_prime);
    return p;
}

double expected_return_time(const std::vector<std::uint64_t>& z, bool from_root, double beta) {
    if (from_root) {
        if (z.size() < 2 || z[1] == 0) throw DomainError("return time: root has no children");
        double sum = 0.0, bp = 1.0;
        for (std::size_t n = 1; n < z.size(); ++n, bp *= beta) sum += static_cast<double>(z[n]) * bp;
        return 2.0 * sum / static_cast<double>(z[1]);
    }
    double sum = 0.0, bp = 1.0;
    for (std::size_t n = 0; n < z.size(); ++n, bp *= beta) sum += static_cast<double>(z[n]) * bp;
    return 2.0 * sum - 1.0;
}

double expected_return_time(const Tree& tree, bool from_root, double beta) {
    if (!tree.frontier().empty()) throw InfiniteTree("return time: tree has an unexpanded frontier");
    return expected_return_time(tree.generation_sizes(tree.root()), from_root, beta);
}

DeepestPoint deepest_point_probabilities(int height, double beta) {
    if (height < 1 || !(beta > 1.0)) throw DomainError("deepest point: needs H >= 1, beta > 1");
    const double num = 1.0 - 1.0 / beta;
    return {num / (1.0 - std::pow(beta, -(height + 1.0))), num / (std::pow(beta, height) - 1.0 / beta)};
}

TrapTimeConstants trap_time_constants(double beta, double mu) {
    if (!(beta * mu < 1.0)) throw DomainError("trap time constants: need beta mu < 1");
    return {2.0 / (1.0 - beta * mu), (beta - 1.0) * (1.0 - beta * mu) / (2.0 * beta)};
}

double subordinator_constant(double alpha, double beta, double mu) {
    const double x = std::numbers::pi * (alpha - 1.0);
    return x / std::sin(x) * std::pow(beta * (1.0 - beta * mu) / (2.0 * (beta - 1.0)), alpha - 1.0);
}

double subordinator_constant_from_theta(double alpha, double beta, double mu) {
    const double x = std::numbers::pi * (alpha - 1.0);
    return x / std::sin(x) * std::pow(trap_time_constants(beta, mu).theta, 1.0 - alpha);
}

double deep_trap_count_pmf(double alpha, int l) {
    if (l < 1) return 0.0;
    double r = 1.0;
    for (int j = 1; j <= l; ++j) r *= std::abs(alpha - j) / j;
    return r;
}

double deep_trap_count_pmf_at(const OffspringLaw& law, int m, int l) {
    if (l < 0) return 0.0;
    HeightCdf h = height_cdf_and_cmu(law, m);
    const double s = h.s[m], t = h.tail[m];
    double fact = std::tgamma(l + 1.0);
    return std::pow(t, l) * law.gf_derivative(s, l + 1) / (fact * law.mean());
}

HeightCdf height_cdf_and_cmu(const OffspringLaw& law, int n_max) {
    const double mu = law.mean();
    if (mu > 1.0) throw NotSubcritical("height cdf: offspring mean must be <= 1");
    if (n_max < 1) throw DomainError("height cdf: n_max must be >= 1");
    HeightCdf h;
    h.tail.resize(n_max + 1);
    h.s.resize(n_max + 1);
    h.tail[0] = 1.0;
    for (int n = 0; n < n_max; ++n) h.tail[n + 1] = law.gf_complement(h.tail[n]);
    for (int n = 0; n <= n_max; ++n) h.s[n] = 1.0 - h.tail[n];
    if (mu > 0.0 && mu < 1.0 && h.tail[n_max] > 0.0) {
        auto c = [&](int n) { return h.tail[n] / std::pow(mu, n); };
        h.c_mu = c(n_max);
        h.cauchy_gap = std::abs(h.c_mu - c(n_max / 2));
        h.c_mu_defined = std::isfinite(h.c_mu);
    }
    return h;
}

double supercritical_branch_tail_constant(const OffspringLaw& law, int n_max) {
    const double mu = law.mean();
    if (!(mu > 1.0)) throw DomainError("branch tail constant: needs mu > 1");
    const double q = extinction_probability(law);
    if (!(q > 0.0)) throw DomainError("branch tail constant: law has no extinction");
    const double fq = law.gf_derivative(q, 1);
    const HeightCdf h = height_cdf_and_cmu(law.tilted(q), n_max);
    return q * (mu - fq) * h.c_mu / (1.0 - q);
}

double backbone_offspring_pmf(const OffspringLaw& law, double q, std::uint64_t k) {
    if (k == 0) return 0.0;
    if (q <= 0.0) return law.pmf(k);
    const double lq = std::log(q), l1q = std::log1p(-q);
    double sum = 0.0;
    int small = 0;
    for (std::uint64_t j = k;; ++j) {
        const double p = law.pmf(j);
        if (p > 0.0) {
            const double jd = static_cast<double>(j), kd = static_cast<double>(k);
            double term = p * std::exp(std::lgamma(jd + 1) - std::lgamma(kd + 1) - std::lgamma(jd - kd + 1) +
                                       kd * l1q + (jd - kd) * lq);
            sum += term;
            small = term < 1e-18 * sum ? small + 1 : 0;
        } else {
            ++small;
        }
        if (law.tail(j + 1) <= 0.0 || small > 64) break;
    }
    return sum / (1.0 - q);
}

double excursion_success_probability(double beta, int traps) {
    return (beta - 1.0) / ((traps + 1.0) * beta - 1.0);
}

double mean_nonleaf_excursion(const OffspringLaw& trap_law, double beta) {
    const double mu = trap_law.mean(), p0 = trap_law.p0();
    if (!(beta * mu < 1.0)) throw DomainError("mean excursion: needs beta mu < 1");
    return 2.0 * (1.0 + beta * mu / ((1.0 - p0) * (1.0 - beta * mu)));
}

}  // namespace gwe
