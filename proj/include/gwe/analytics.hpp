#pragma once

#include <cstdint>
#include <vector>

#include "gwe/distributions.hpp"
#include "gwe/tree.hpp"

namespace gwe {

enum class Regime {
    Recurrent,
    Ballistic,
    IVFE,
    FVIE,
    IVIE,
    SupBallistic,
    SupSubballistic,
    Boundary,
    CriticalUnsupported,
};
const char* regime_name(Regime r);

struct RegimeParams {
    OffspringLaw law;
    double beta = 0.0;
    double mu = 0.0;
    double q = 1.0;
    double fq_prime = 0.0;  // f'(q); equals mu when q = 1
    double gamma = 0.0;     // 0 when undefined
    Regime regime = Regime::Recurrent;
};

RegimeParams regime_params(const OffspringLaw& law, double beta);

// Smallest fixed point of f on [0,1].
double extinction_probability(const OffspringLaw& law);

Regime phase_classify(const RegimeParams& params, double alpha);
Regime phase_classify(double mu, double beta, double fq_prime, double alpha);

double gamma_exponent(const RegimeParams& params);
double gamma_exponent(double mu, double beta, double fq_prime);

// Expected return time to the root (from_root) or, with from_root = false, the
// expected time for a walk started at the root to reach a virtual parent above it.
double expected_return_time(const Tree& tree, bool from_root, double beta);
double expected_return_time(const std::vector<std::uint64_t>& generation_sizes, bool from_root, double beta);

struct DeepestPoint {
    double p1;  // reach the deepest point before the root, started one level below the root
    double p2;  // leave the deepest point and hit the root before coming back
};
DeepestPoint deepest_point_probabilities(int height, double beta);

struct TrapTimeConstants {
    double e_t11;
    double theta;
};
TrapTimeConstants trap_time_constants(double beta, double mu);

double subordinator_constant(double alpha, double beta, double mu);
// Constant implied by branch time ~ xi* Z with Z ~ Exp(theta): Gamma(alpha) Gamma(2 - alpha) theta^{1 - alpha}.
double subordinator_constant_from_theta(double alpha, double beta, double mu);

// Limit law of the number of deep traps in a branch, l >= 1.
double deep_trap_count_pmf(double alpha, int l);
// Same count at finite threshold m: P(N(m) = l), l >= 0.
double deep_trap_count_pmf_at(const OffspringLaw& law, int m, int l);

struct HeightCdf {
    std::vector<double> s;     // s[n] = P(H < n)
    std::vector<double> tail;  // 1 - s[n], kept separately for accuracy
    double c_mu = 0.0;
    double cauchy_gap = 0.0;
    bool c_mu_defined = false;
};
HeightCdf height_cdf_and_cmu(const OffspringLaw& law, int n_max);

// C* with P(H(branch) > n) ~ C* f'(q)^n for supercritical laws.
double supercritical_branch_tail_constant(const OffspringLaw& law, int n_max = 200);

// Backbone offspring pmf of a supercritical tree: coefficients of (f((1-q)s+q)-q)/(1-q).
double backbone_offspring_pmf(const OffspringLaw& law, double q, std::uint64_t k);

// Success parameter of the geometric excursion count into a set of `traps` traps.
double excursion_success_probability(double beta, int traps);

// Mean duration of an excursion into a uniformly chosen non-leaf bud (needs beta mu < 1).
double mean_nonleaf_excursion(const OffspringLaw& trap_law, double beta);

}  // namespace gwe
