#include "gwe/selfcheck.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "gwe/analytics.hpp"
#include "gwe/errors.hpp"
#include "gwe/oracle.hpp"
#include "gwe/samplers.hpp"

namespace gwe {
namespace {

struct Check {
    std::string name;
    std::function<std::string()> body;  // empty string on success
};

std::string close(double got, double want, double tol, const char* what) {
    const double err = std::abs(got - want);
    if (err <= tol) return {};
    std::ostringstream os;
    os.precision(17);
    os << what << ": got " << got << ", want " << want << " (err " << err << ")";
    return os.str();
}

std::string check_extinction() {
    OffspringLaw g = OffspringLaw::geometric(2.0 / 3.0);
    const double q = extinction_probability(g);
    if (auto e = close(q, 0.5, 1e-10, "q"); !e.empty()) return e;
    if (auto e = close(g.gf_derivative(q, 1), 0.5, 1e-10, "f'(q)"); !e.empty()) return e;
    return close(extinction_probability(OffspringLaw::finite({0.25, 0.25, 0.5})), 0.5, 1e-12, "finite q");
}

std::string check_return_time() {
    const OffspringLaw law = OffspringLaw::geometric(1.0 / 3.0);
    int done = 0;
    for (std::uint64_t s = 0; done < 50 && s < 100'000; ++s) {
        Tree t = sample_gw(law, 64, SeedStream{77, s});
        if (!t.frontier().empty() || t.node(0).degree() == 0) continue;
        auto e = oracle::ExplicitTree::from_tree(t);
        if (e.size() > 50) continue;
        oracle::AbsorptionProblem pb(e, 2.0, {e.root}, {});
        const double want = oracle::exact_expected_time_after_step(pb, e.root);
        const double got = expected_return_time(t, true, 2.0);
        if (std::abs(got - want) > 1e-9 * want) return close(got, want, 1e-9 * want, "return time");
        ++done;
    }
    return done == 50 ? std::string{} : "too few fixtures";
}

std::string check_transit() {
    for (double beta : {1.5, 2.0, 4.0})
        for (int h = 1; h <= 6; ++h) {
            const auto path = oracle::ExplicitTree::path(h + 1);
            const std::size_t bottom = h + 1;
            oracle::AbsorptionProblem pb(path, beta, {bottom}, {0});
            const double p1 = oracle::exact_hit_probability(pb)[1];
            oracle::AbsorptionProblem back(path, beta, {0}, {bottom});
            const double p2 = oracle::exact_hit_probability_after_step(back, bottom);
            DeepestPoint d = deepest_point_probabilities(h, beta);
            if (auto e = close(d.p1, p1, 1e-12, "p1"); !e.empty()) return e;
            if (auto e = close(d.p2, p2, 1e-12, "p2"); !e.empty()) return e;
        }
    return {};
}

std::string check_gamblers_ruin() {
    auto path = oracle::ExplicitTree::path(30);
    oracle::AbsorptionProblem pb(path, 2.0, {30}, {0});
    auto h = oracle::exact_hit_probability(pb);
    oracle::AbsorptionProblem other(path, 2.0, {0}, {30});
    auto g = oracle::exact_hit_probability(other);
    for (std::size_t v = 0; v <= 30; ++v)
        if (auto e = close(h[v] + g[v], 1.0, 1e-12, "partition sum"); !e.empty()) return e;
    const double r = 0.5;
    return close(h[1], (1.0 - r) / (1.0 - std::pow(r, 30)), 1e-12, "ray escape");
}

std::string check_deep_pmf() {
    for (double alpha : {1.1, 1.5, 1.9}) {
        const double nu = alpha - 1.0;
        const int n = 2'000;
        double sum = 0.0;
        for (int l = n; l >= 1; --l) sum += deep_trap_count_pmf(alpha, l);
        const double rest = std::exp(std::lgamma(n + 1.0 - nu) - std::lgamma(1.0 - nu) - std::lgamma(n + 1.0));
        if (auto e = close(sum + rest, 1.0, 1e-10, "deep pmf total"); !e.empty()) return e;
    }
    return {};
}

std::string check_constants() {
    TrapTimeConstants t = trap_time_constants(1.5, 0.5);
    if (auto e = close(t.e_t11, 8.0, 1e-12, "E T11"); !e.empty()) return e;
    if (auto e = close(t.theta, 0.5 * 0.25 / 3.0, 1e-12, "theta"); !e.empty()) return e;
    // alpha = 1.5: pi/2 / sin(pi/2) * sqrt(1.5 * 0.25 / 1)
    return close(subordinator_constant(1.5, 1.5, 0.5), 0.5 * M_PI * std::sqrt(0.375), 1e-12, "C");
}

std::string check_height_sampler() {
    const OffspringLaw law = OffspringLaw::finite({0.5, 0.0, 0.5});
    for (int h : {1, 2}) {
        auto exact = oracle::enumerate_height_conditioned(law, h);
        std::map<std::string, double> freq;
        const int n = 20'000;
        for (int i = 0; i < n; ++i) {
            HeightConditionedTree t = sample_height_conditioned(law, h, SeedStream{99, static_cast<std::uint64_t>(i)});
            freq[oracle::shape_code(t.tree, t.tree.root())] += 1.0 / n;
        }
        double tv = 0.0;
        for (auto& [k, p] : exact) tv += std::abs(p - freq[k]);
        for (auto& [k, p] : freq)
            if (!exact.count(k)) tv += p;
        if (0.5 * tv > 0.02) return "total variation " + std::to_string(0.5 * tv);
    }
    return {};
}

std::string check_phase() {
    auto tag = [](const OffspringLaw& l, double b) { return regime_params(l, b).regime; };
    if (tag(OffspringLaw::geometric(1.0 / 3.0), 3.0) != Regime::FVIE) return "Geometric mu=0.5 beta=3";
    if (tag(OffspringLaw::geometric(2.0 / 3.0), 2.0) != Regime::SupSubballistic) return "Geometric mu=2 beta=2";
    if (tag(OffspringLaw::power_tail_with_mean(1.5, 0.5, 100'000), 1.5) != Regime::IVFE) return "PowerTail beta=1.5";
    return {};
}

}  // namespace

int run_self_check(std::ostream& os) {
    const std::vector<Check> checks{
        {"extinction", check_extinction},
        {"return-time-vs-solve", check_return_time},
        {"transit-probabilities", check_transit},
        {"gamblers-ruin", check_gamblers_ruin},
        {"deep-trap-pmf-total", check_deep_pmf},
        {"trap-constants", check_constants},
        {"height-conditioned-sampler", check_height_sampler},
        {"phase-tags", check_phase},
    };
    int failures = 0;
    for (const auto& c : checks) {
        auto t0 = std::chrono::steady_clock::now();
        std::string err;
        try {
            err = c.body();
        } catch (const std::exception& e) {
            err = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        os << (err.empty() ? "PASS " : "FAIL ") << c.name << " (" << secs << " s)";
        if (!err.empty()) {
            os << ": " << err;
            ++failures;
        }
        os << '\n';
    }
    return failures;
}

}  // namespace gwe
