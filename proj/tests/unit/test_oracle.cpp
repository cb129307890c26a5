#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gwe/analytics.hpp"
#include "gwe/errors.hpp"
#include "gwe/oracle.hpp"
#include "gwe/samplers.hpp"
#include "reference.hpp"

using namespace gwe;
using oracle::AbsorptionProblem;
using oracle::ExplicitTree;

namespace {

std::vector<Tree> load_fixtures() {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(GWE_FIXTURE_DIR))
        if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Tree> out;
    for (const auto& f : files) {
        std::ifstream is(f);
        out.push_back(load_tree_jsonl(is));
    }
    return out;
}

ExplicitTree with_virtual_parent(const ExplicitTree& t) {
    ExplicitTree out;
    out.parent.push_back(ExplicitTree::npos);
    out.children.push_back({1});
    for (std::size_t v = 0; v < t.size(); ++v) {
        out.parent.push_back(t.parent[v] == ExplicitTree::npos ? 0 : t.parent[v] + 1);
        out.children.emplace_back();
        for (auto c : t.children[v]) out.children.back().push_back(c + 1);
    }
    return out;
}

ExplicitTree star(std::size_t leaves) {
    ExplicitTree t;
    t.parent.push_back(ExplicitTree::npos);
    t.children.emplace_back();
    for (std::size_t i = 1; i <= leaves; ++i) {
        t.parent.push_back(0);
        t.children.emplace_back();
        t.children[0].push_back(i);
    }
    return t;
}

}  // namespace

TEST_CASE("path examples") {
    AbsorptionProblem pb(ExplicitTree::path(2), 2.0, {2}, {0});
    auto h = oracle::exact_hit_probability(pb);
    CHECK(h[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(h[2] == 1.0);
    CHECK(h[0] == 0.0);
    CHECK(oracle::last_residual() <= 1e-12);

    AbsorptionProblem edge(ExplicitTree::path(1), 3.0, {0}, {});
    CHECK(oracle::exact_expected_time_after_step(edge, 0) == doctest::Approx(2.0).epsilon(1e-14));
    AbsorptionProblem three(ExplicitTree::path(3), 2.0, {0}, {});
    CHECK(oracle::exact_expected_time_after_step(three, 0) == doctest::Approx(14.0).epsilon(1e-12));
}

TEST_CASE("kernel rows") {
    ExplicitTree t = star(3);
    AbsorptionProblem pb(t, 2.0, {1}, {});
    auto r0 = pb.row(0);
    REQUIRE(r0.size() == 3);
    for (auto [v, p] : r0) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    auto r2 = pb.row(2);
    REQUIRE(r2.size() == 1);
    CHECK(r2[0].first == 0);
    CHECK(r2[0].second == 1.0);
    AbsorptionProblem mid(ExplicitTree::path(2), 2.0, {0}, {});
    auto r1 = mid.row(1);
    double sum = 0.0;
    for (auto [v, p] : r1) {
        sum += p;
        CHECK(p == doctest::Approx(v == 0 ? 1.0 / 3.0 : 2.0 / 3.0).epsilon(1e-15));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("construction guards") {
    CHECK_THROWS_AS(AbsorptionProblem(star(4), 1.0, {1}, {0}), DomainError);
    CHECK_THROWS_AS(AbsorptionProblem(star(4), 2.0, {}, {}), DomainError);
    CHECK_THROWS_AS(AbsorptionProblem(star(4), 2.0, {1}, {1}), DomainError);
    CHECK_THROWS_AS(AbsorptionProblem(ExplicitTree::path(10'001), 2.0, {0}, {}), DomainError);
}

TEST_CASE("ray escape equals gambler's ruin") {
    AbsorptionProblem pb(ExplicitTree::path(30), 2.0, {30}, {0});
    auto h = oracle::exact_hit_probability(pb);
    for (std::size_t i = 1; i < 30; ++i)
        CHECK(std::abs(h[i] - ref::gamblers_ruin(static_cast<int>(i), 30, 2.0 / 3.0)) <= 1e-12);
    CHECK(std::abs(h[1] - 0.5) < 1e-9);
}

TEST_CASE("hit probabilities over a partition sum to one") {
    auto fixtures = load_fixtures();
    for (std::size_t i = 0; i < fixtures.size(); i += 5) {
        ExplicitTree t = ExplicitTree::from_tree(fixtures[i]);
        std::vector<std::size_t> leaves;
        for (std::size_t v = 0; v < t.size(); ++v)
            if (t.children[v].empty()) leaves.push_back(v);
        std::vector<std::size_t> a{0}, b;
        for (std::size_t k = 0; k < leaves.size(); ++k) (k % 2 ? a : b).push_back(leaves[k]);
        auto ha = oracle::exact_hit_probability(AbsorptionProblem(t, 1.7, a, b));
        auto hb = oracle::exact_hit_probability(AbsorptionProblem(t, 1.7, b, a));
        for (std::size_t v = 0; v < t.size(); ++v) CHECK(std::abs(ha[v] + hb[v] - 1.0) <= 1e-12);
    }
}

TEST_CASE("return time formula against the solve on fixtures") {
    auto fixtures = load_fixtures();
    REQUIRE(fixtures.size() == 50);
    bool saw_thirty = false;
    for (const auto& tree : fixtures) {
        ExplicitTree t = ExplicitTree::from_tree(tree);
        CHECK(t.size() <= 50);
        saw_thirty |= t.size() == 30;
        for (double beta : {1.3, 2.0, 4.0}) {
            const double formula = expected_return_time(tree, true, beta);
            AbsorptionProblem pb(t, beta, {t.root}, {});
            const double solved = oracle::exact_expected_time_after_step(pb, t.root);
            CHECK(std::abs(formula - solved) <= 1e-9 * formula);
            CHECK(oracle::last_residual() <= 1e-12);

            const double bud = expected_return_time(tree, false, beta);
            ExplicitTree up = with_virtual_parent(t);
            AbsorptionProblem pu(up, beta, {0}, {});
            const double bud_solved = oracle::exact_expected_hitting_time(pu)[1];
            CHECK(std::abs(bud - bud_solved) <= 1e-9 * bud);
        }
    }
    CHECK(saw_thirty);
}

TEST_CASE("large instance") {
    // complete binary tree of depth 11: 4095 vertices
    ExplicitTree t;
    t.parent.push_back(ExplicitTree::npos);
    t.children.emplace_back();
    for (std::size_t v = 1; v < 4095; ++v) {
        const std::size_t p = (v - 1) / 2;
        t.parent.push_back(p);
        t.children.emplace_back();
        t.children[p].push_back(v);
    }
    std::vector<std::uint64_t> z;
    for (int n = 0; n <= 11; ++n) z.push_back(std::uint64_t{1} << n);
    const double beta = 1.1;
    AbsorptionProblem pb(t, beta, {0}, {});
    const double solved = oracle::exact_expected_time_after_step(pb, 0);
    CHECK(std::abs(solved - expected_return_time(z, true, beta)) <= 1e-9 * solved);
    CHECK(oracle::last_residual() <= 1e-12);
}

TEST_CASE("fixture round trip") {
    auto fixtures = load_fixtures();
    for (const auto& tree : fixtures) {
        std::stringstream ss;
        tree.dump_jsonl(ss);
        Tree back = load_tree_jsonl(ss);
        CHECK(back.generation_sizes(0) == tree.generation_sizes(0));
        CHECK(oracle::shape_code(back, 0) == oracle::shape_code(tree, 0));
    }
}

TEST_CASE("height-conditioned enumeration") {
    auto unary = oracle::enumerate_height_conditioned(OffspringLaw::finite({0.5, 0.5}), 2);
    REQUIRE(unary.size() == 1);
    CHECK(unary.begin()->first == "((()))");
    CHECK(unary.begin()->second == doctest::Approx(1.0).epsilon(1e-15));

    auto binary = oracle::enumerate_height_conditioned(OffspringLaw::finite({0.5, 0.0, 0.5}), 1);
    REQUIRE(binary.size() == 1);
    CHECK(binary.begin()->first == "(()())");

    auto zero = oracle::enumerate_height_conditioned(OffspringLaw::finite({0.5, 0.5}), 0);
    REQUIRE(zero.size() == 1);
    CHECK(zero.begin()->first == "()");

    // P(H = 1) for {0.6, 0.2, 0.2}: p1 p0 + p2 p0^2 split over the two shapes
    auto small = oracle::enumerate_height_conditioned(OffspringLaw::finite({0.6, 0.2, 0.2}), 1);
    REQUIRE(small.size() == 2);
    const double z = 0.2 * 0.6 + 0.2 * 0.36;
    CHECK(small.at("(())") == doctest::Approx(0.12 / z).epsilon(1e-14));
    CHECK(small.at("(()())") == doctest::Approx(0.072 / z).epsilon(1e-14));

    double total = 0.0;
    for (auto& [code, p] : oracle::enumerate_height_conditioned(OffspringLaw::finite({0.5, 0.3, 0.2}), 3)) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-13));

    CHECK_THROWS_AS(oracle::enumerate_height_conditioned(OffspringLaw::finite({1.0}), 1), ImpossibleHeight);
    std::vector<double> wide(11, 0.05);
    wide[0] = 0.5;
    CHECK_THROWS_AS(oracle::enumerate_height_conditioned(OffspringLaw::finite(wide), 3), ExplosionGuard);
}

TEST_CASE("height-conditioned sampler against enumeration") {
    for (auto [law, h] : {std::pair{OffspringLaw::finite({0.5, 0.3, 0.2}), 2},
                          std::pair{OffspringLaw::finite({0.6, 0.0, 0.4}), 3}}) {
        auto exact = oracle::enumerate_height_conditioned(law, h);
        std::map<std::string, double> freq;
        const int n = 100'000;
        for (int i = 0; i < n; ++i) {
            auto t = sample_height_conditioned(law, h, SeedStream{31, static_cast<std::uint64_t>(i)});
            freq[oracle::shape_code(t.tree, t.tree.root())] += 1.0 / n;
        }
        double tv = 0.0;
        for (auto& [k, p] : exact) tv += std::abs(p - (freq.count(k) ? freq[k] : 0.0));
        for (auto& [k, p] : freq)
            if (!exact.count(k)) tv += p;
        CAPTURE(h);
        CHECK(0.5 * tv < 0.01);
    }
}
