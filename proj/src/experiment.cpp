#include "gwe/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "gwe/analytics.hpp"
#include "gwe/errors.hpp"
#include "gwe/oracle.hpp"
#include "gwe/aggregate.hpp"
#include "gwe/samplers.hpp"
#include "gwe/stats.hpp"

namespace gwe::cli {
namespace fs = std::filesystem;
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::set<std::string> kKinds{"walk-scaling",      "excursion-law",      "deep-trap-count",
                                   "return-time-check", "supercritical-tail", "phase-sweep"};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <class T>
void take(const json& j, const char* key, T& field) {
    if (!j.contains(key)) return;
    try {
        field = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

json estimator(const std::string& name, json value, json se = nullptr, json target = nullptr,
               json p_value = nullptr) {
    return {{"estimator", name}, {"value", value}, {"se", se}, {"target", target}, {"p_value", p_value}};
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// Geometric-failures pmf (1-p)^w p on bins 0..last, tail mass folded into the last bin.
std::vector<double> geometric_bins(double p, std::size_t last) {
    std::vector<double> e(last + 1);
    for (std::size_t w = 0; w < last; ++w) e[w] = p * std::pow(1.0 - p, static_cast<double>(w));
    e[last] = std::pow(1.0 - p, static_cast<double>(last));
    return e;
}

json geometric_fit(const std::string& name, const std::vector<std::uint64_t>& w, double p_target) {
    json out = json::array();
    if (w.empty()) {
        out.push_back(estimator(name, nullptr, nullptr, p_target));
        return out;
    }
    std::uint64_t wmax = *std::max_element(w.begin(), w.end());
    std::vector<std::uint64_t> obs(wmax + 1, 0);
    double sum = 0.0;
    for (auto v : w) {
        ++obs[v];
        sum += static_cast<double>(v);
    }
    const double n = static_cast<double>(w.size());
    const double p_hat = 1.0 / (1.0 + sum / n);
    json pv = nullptr;
    try {
        pv = stats::chi_square_gof(obs, geometric_bins(p_target, wmax)).p_value;
    } catch (const DegenerateBins&) {
    }
    out.push_back(estimator(name, p_hat, p_hat * std::sqrt((1.0 - p_hat) / n), p_target, pv));
    out.push_back(estimator(name + "_samples", n));
    return out;
}

Tree infinite_tree(const OffspringLaw& law, std::uint32_t generations, const SeedStream& s, std::uint64_t budget) {
    if (law.mean() < 1.0) return sample_kesten(law, generations, s, budget);
    return sample_supercritical_conditioned(law, generations, s, budget);
}

json walk_scaling_replica(const ExperimentConfig& c, const OffspringLaw& law, const SeedStream& s) {
    json r;
    if (c.observable == "distance") {
        auto cps = dyadic_levels(c.min_steps, c.max_steps);
        Tree t = infinite_tree(law, 1, s, c.node_budget);
        WalkOptions o;
        o.beta = c.beta;
        o.step_budget = c.max_steps;
        o.checkpoints = cps;
        Walker w(t, o, s.engine());
        bool censored = false;
        try {
            w.run_steps(c.max_steps);
        } catch (const BudgetExceeded& e) {
            censored = true;
            r["error"] = e.what();
        }
        const WalkRun& run = w.run();
        r["checkpoints"] = cps;
        json d = json::array();
        for (const auto& v : run.distance) d.push_back(v ? json(*v) : json(nullptr));
        r["distance"] = d;
        r["censored"] = censored;
        r["steps"] = run.steps;
        r["nodes"] = t.size();
        return r;
    }
    auto levels = dyadic_levels(c.min_level, c.max_level);
    r["levels"] = levels;
    if (c.engine == "aggregated") {
        AggregateOptions ao;
        ao.exact_excursion_cap = c.excursion_cap;
        ao.node_budget = c.node_budget;
        try {
            AggregateResult a = sample_hitting_times_aggregated(law, c.beta, levels, ao, s);
            r["delta"] = a.hitting;
            r["censored"] = false;
            r["capped_branches"] = a.capped_branches;
            r["capped_steps"] = a.capped_steps;
            r["walked_excursions"] = a.walked_excursions;
            r["nodes"] = a.nodes;
        } catch (const BudgetExceeded& e) {
            r["delta"] = std::vector<json>(levels.size(), nullptr);
            r["censored"] = true;
            r["error"] = e.what();
        }
        return r;
    }
    Tree t = infinite_tree(law, static_cast<std::uint32_t>(c.max_level), s, c.node_budget);
    WalkOptions o;
    o.beta = c.beta;
    o.step_budget = c.step_budget;
    o.levels = levels;
    Walker w(t, o, s.engine());
    bool censored = false;
    try {
        censored = !w.run_to_level(c.max_level);
    } catch (const BudgetExceeded& e) {
        censored = true;
        r["error"] = e.what();
    }
    const WalkRun& run = w.run();
    json d = json::array();
    for (const auto& v : run.hitting) d.push_back(v ? json(*v) : json(nullptr));
    r["delta"] = d;
    r["censored"] = censored;
    r["steps"] = run.steps;
    r["nodes"] = t.size();
    return r;
}

json excursion_replica(const ExperimentConfig& c, const OffspringLaw& law, const SeedStream& s) {
    json r;
    const auto n = static_cast<std::uint32_t>(c.max_level);
    Tree t = sample_kesten(law, n, s, c.node_budget);
    WalkOptions o;
    o.beta = c.beta;
    o.step_budget = c.step_budget;
    o.levels = {n};
    o.track_excursions = true;
    Walker w(t, o, s.engine());
    bool censored = false;
    try {
        censored = !w.run_to_level(n);
    } catch (const BudgetExceeded& e) {
        censored = true;
        r["error"] = e.what();
    }
    const WalkRun& run = w.run();
    json buds = json::array(), first = json::array(), branch = json::array();
    NodeId x = t.root();
    for (std::uint32_t i = 0; i < n; ++i) {
        const Node& nd = t.node(x);
        const std::uint64_t k = nd.degree() - nd.n_backbone;
        buds.push_back(k);
        if (i >= 1 && i + c.margin <= n) {
            std::uint64_t w0 = 0, total = 0;
            for (auto it = run.excursions.lower_bound({x, 0}); it != run.excursions.end() && it->first.branch == x;
                 ++it) {
                total += it->second.entries;
                if (it->first.bud == 0) w0 = it->second.entries;
            }
            first.push_back(k >= 1 ? json(w0) : json(nullptr));
            branch.push_back(total);
        }
        x = t.backbone_child(x, 0);
    }
    r["buds"] = buds;
    r["w_first"] = first;
    r["w_branch"] = branch;
    r["censored"] = censored;
    r["steps"] = run.steps;
    return r;
}

json deep_trap_replica(const ExperimentConfig& c, const OffspringLaw& law, const SeedStream& s) {
    const auto m = static_cast<int>(c.threshold);
    SizeBiasedLaw spine(law);
    const double tail = height_cdf_and_cmu(law, std::max(m, 1)).tail[m];
    Engine g = s.engine();
    std::vector<std::uint64_t> hist;
    for (std::uint64_t b = 0; b < c.branches; ++b) {
        BranchDeepCount d = sample_branch_deep_traps(spine, static_cast<std::uint32_t>(m), tail, g);
        if (d.deep >= hist.size()) hist.resize(d.deep + 1, 0);
        ++hist[d.deep];
    }
    return {{"hist", hist}, {"branches", c.branches}};
}

json return_time_replica(const ExperimentConfig& c, const OffspringLaw& law, const SeedStream& s) {
    for (std::uint64_t attempt = 0; attempt < 100'000; ++attempt) {
        std::optional<Tree> t;
        try {
            t.emplace(sample_gw(law, 64, s.substream(attempt), std::max<std::uint64_t>(c.max_vertices, 2)));
        } catch (const BudgetExceeded&) {
            continue;
        }
        if (!t->frontier().empty() || t->node(t->root()).degree() == 0) continue;
        oracle::ExplicitTree e = oracle::ExplicitTree::from_tree(*t);
        if (e.size() > c.max_vertices) continue;
        const double f_root = expected_return_time(*t, true, c.beta);
        const double f_bud = expected_return_time(*t, false, c.beta);
        oracle::AbsorptionProblem at_root(e, c.beta, {e.root}, {});
        const double o_root = oracle::exact_expected_time_after_step(at_root, e.root);
        oracle::ExplicitTree up = e;
        const std::size_t top = up.size();
        up.parent.push_back(oracle::ExplicitTree::npos);
        up.children.push_back({e.root});
        up.parent[e.root] = top;
        up.root = top;
        oracle::AbsorptionProblem to_parent(up, c.beta, {top}, {});
        const double o_bud = oracle::exact_expected_hitting_time(to_parent)[e.root];
        const double err = std::max(std::abs(f_root - o_root) / o_root, std::abs(f_bud - o_bud) / o_bud);
        return {{"vertices", e.size()},  {"attempt", attempt}, {"formula_root", f_root}, {"oracle_root", o_root},
                {"formula_bud", f_bud}, {"oracle_bud", o_bud}, {"rel_err", err}};
    }
    throw DomainError("return-time-check: no admissible tree in 1e5 attempts");
}

json supercritical_replica(const ExperimentConfig& c, const OffspringLaw& law, const SeedStream& s) {
    Tree t = sample_supercritical_conditioned(law, static_cast<std::uint32_t>(c.depth), s, c.node_budget);
    expand_traps(t);
    std::vector<std::uint64_t> heights, degrees;
    auto bump = [](std::vector<std::uint64_t>& h, std::uint64_t v) {
        if (v >= h.size()) h.resize(v + 1, 0);
        ++h[v];
    };
    auto branches = decompose_branches(t);
    for (const auto& b : branches) {
        bump(heights, b.height);
        bump(degrees, t.node(b.root).n_backbone);
    }
    return {{"branches", branches.size()}, {"height_hist", heights}, {"backbone_degree_hist", degrees}};
}

std::vector<std::uint64_t> merge_hist(const std::vector<json>& records, const char* key) {
    std::vector<std::uint64_t> total;
    for (const auto& r : records) {
        auto h = r.at(key).get<std::vector<std::uint64_t>>();
        if (h.size() > total.size()) total.resize(h.size(), 0);
        for (std::size_t i = 0; i < h.size(); ++i) total[i] += h[i];
    }
    return total;
}

double tail_index_of(const OffspringLaw& law) { return law.family() == Family::PowerTail ? law.alpha() : 2.0; }

json summarize_walk(const ExperimentConfig& c, const OffspringLaw& law, const RegimeParams& rp,
                    const std::vector<json>& records, json& out) {
    const bool distance = c.observable == "distance";
    const char* lkey = distance ? "checkpoints" : "levels";
    const char* vkey = distance ? "distance" : "delta";
    auto levels = records.front().at(lkey).get<std::vector<std::uint64_t>>();
    std::vector<std::vector<double>> table(levels.size());
    for (const auto& r : records) {
        const auto& v = r.at(vkey);
        for (std::size_t i = 0; i < levels.size(); ++i) table[i].push_back(v.at(i).is_null() ? kInf : v.at(i).get<double>());
    }
    json rows = json::array(), plot = json::array(), est = json::array();
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto& col = table[i];
        const double cens = static_cast<double>(std::count(col.begin(), col.end(), kInf)) / static_cast<double>(col.size());
        const double med = stats::median(col), q25 = stats::quantile(col, 0.25), q75 = stats::quantile(col, 0.75);
        rows.push_back({{"level", i},
                        {"n", levels[i]},
                        {"median_delta", finite_or_null(med)},
                        {"q25", finite_or_null(q25)},
                        {"q75", finite_or_null(q75)},
                        {"censored_frac", cens}});
        plot.push_back({{"x", levels[i]}, {"y", finite_or_null(med)}, {"y_err", finite_or_null(0.5 * (q75 - q25))}});
    }

    const double alpha = tail_index_of(law);
    json target = nullptr;
    switch (rp.regime) {
        case Regime::FVIE: target = 1.0 / rp.gamma; break;
        case Regime::IVFE: target = 1.0 / (alpha - 1.0); break;
        case Regime::IVIE: target = 1.0 / (rp.gamma * (alpha - 1.0)); break;
        case Regime::Ballistic:
        case Regime::SupBallistic: target = 1.0; break;
        default: break;
    }
    if (distance && !target.is_null()) target = 1.0 / target.get<double>();
    try {
        std::vector<double> lv(levels.begin(), levels.end());
        stats::Slope sl = stats::loglog_slope(lv, table);
        est.push_back(estimator("loglog_slope", sl.slope, sl.se, target));
    } catch (const Error& e) {
        est.push_back(estimator("loglog_slope", nullptr, nullptr, target));
        out["slope_error"] = e.what();
    }

    if (!distance && law.family() == Family::PowerTail && law.mean() < 1.0) {
        const double an = ScalingSequence(law)(static_cast<double>(levels.back()));
        stats::SampleSet top;
        for (const auto& r : records) {
            const auto& v = r.at("delta").back();
            if (v.is_null())
                top.add(r.value("steps", 0.0) / an, true);
            else
                top.add(v.get<double>() / an, false);
        }
        const bool ivfe = rp.regime == Regime::IVFE;
        json ht = ivfe ? json(alpha - 1.0) : json(nullptr);
        try {
            stats::HillEstimate h = stats::hill_tail_index(top);
            est.push_back(estimator("hill_index", h.index, h.se, ht));
            est.push_back(estimator("hill_index_half_k", h.index_half, nullptr, ht));
            est.push_back(estimator("hill_index_double_k", finite_or_null(h.index_double), nullptr, ht));
            est.push_back(estimator("hill_k", h.k));
            est.push_back(estimator("hill_drifting", h.drifting));
        } catch (const Error& e) {
            est.push_back(estimator("hill_index", nullptr, nullptr, ht));
        }
        if (ivfe) {
            const double cst = subordinator_constant(alpha, c.beta, rp.mu);
            const double cst_theta = subordinator_constant_from_theta(alpha, c.beta, rp.mu);
            est.push_back(estimator("subordinator_constant", cst));
            est.push_back(estimator("subordinator_constant_theta", cst_theta));
            est.push_back(estimator("a_n", an));
            for (double s : c.laplace_s) {
                std::ostringstream name;
                name << "laplace_s=" << s;
                json v = nullptr;
                try {
                    v = stats::empirical_laplace(top, s);
                } catch (const CensoringTooHigh&) {
                }
                est.push_back(estimator(name.str(), v, nullptr, std::exp(-cst * std::pow(s, alpha - 1.0))));
                est.push_back(
                    estimator(name.str() + "_theta", v, nullptr, std::exp(-cst_theta * std::pow(s, alpha - 1.0))));
            }
        }
    }
    std::uint64_t censored = 0;
    for (const auto& r : records) censored += r.at("censored").get<bool>() ? 1 : 0;
    est.push_back(estimator("censored_replicas", censored));
    out["levels"] = rows;
    out["plot"] = plot;
    return est;
}

json summarize_excursions(const ExperimentConfig& c, const OffspringLaw& law, const std::vector<json>& records,
                          json& out) {
    std::vector<std::uint64_t> first, pair;
    std::vector<std::uint64_t> spine_counts;
    for (const auto& r : records) {
        if (r.at("censored").get<bool>()) continue;
        const auto& buds = r.at("buds");
        const auto& f = r.at("w_first");
        const auto& b = r.at("w_branch");
        for (std::size_t i = 0; i < buds.size(); ++i) {
            const auto k = buds[i].get<std::uint64_t>();
            if (k + 1 >= spine_counts.size()) spine_counts.resize(k + 2, 0);
            ++spine_counts[k + 1];
        }
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (!f[i].is_null()) first.push_back(f[i].get<std::uint64_t>());
            if (buds[i + 1].get<std::uint64_t>() == 2) pair.push_back(b[i].get<std::uint64_t>());
        }
    }
    json est = geometric_fit("single_trap_p", first, excursion_success_probability(c.beta, 1));
    for (auto& e : geometric_fit("two_trap_branch_p", pair, excursion_success_probability(c.beta, 2))) est.push_back(e);

    SizeBiasedLaw sb(law);
    double n = 0.0, sum = 0.0;
    for (std::size_t k = 0; k < spine_counts.size(); ++k) {
        n += static_cast<double>(spine_counts[k]);
        sum += static_cast<double>(k * spine_counts[k]);
    }
    if (n > 0.0) {
        std::vector<double> e(spine_counts.size());
        for (std::size_t k = 0; k + 1 < e.size(); ++k) e[k] = sb.pmf(k);
        e.back() = sb.tail(e.size() - 1);
        json pv = nullptr;
        try {
            pv = stats::chi_square_gof(spine_counts, e).p_value;
        } catch (const DegenerateBins&) {
        }
        est.push_back(estimator("spine_mean_offspring", sum / n, nullptr, finite_or_null(sb.mean()), pv));
        est.push_back(estimator("spine_samples", n));
    }

    json plot = json::array();
    if (!first.empty()) {
        std::map<std::uint64_t, double> freq;
        for (auto w : first) freq[w] += 1.0;
        const double total = static_cast<double>(first.size());
        for (auto [w, f] : freq) {
            const double p = f / total;
            plot.push_back({{"x", w}, {"y", p}, {"y_err", std::sqrt(p * (1.0 - p) / total)}});
        }
    }
    out["plot"] = plot;
    return est;
}

json summarize_deep(const ExperimentConfig& c, const OffspringLaw& law, const std::vector<json>& records, json& out) {
    auto hist = merge_hist(records, "hist");
    const auto m = static_cast<int>(c.threshold);
    double all = 0.0, cond = 0.0;
    for (std::size_t l = 0; l < hist.size(); ++l) {
        all += static_cast<double>(hist[l]);
        if (l >= 1) cond += static_cast<double>(hist[l]);
    }
    const bool heavy = law.family() == Family::PowerTail;
    const double p_zero = deep_trap_count_pmf_at(law, m, 0);
    json est = json::array(), plot = json::array(), finite_m = json::array();
    est.push_back(estimator("branches", all));
    est.push_back(estimator("conditioned_branches", cond));
    est.push_back(estimator("p_deep", cond / all, std::sqrt(cond / all * (1.0 - cond / all) / all), 1.0 - p_zero));
    for (int l = 1; l <= 4; ++l) {
        const double k = l < static_cast<int>(hist.size()) ? static_cast<double>(hist[l]) : 0.0;
        const double p = cond > 0.0 ? k / cond : 0.0;
        const double se = cond > 0.0 ? std::sqrt(p * (1.0 - p) / cond) : 0.0;
        const double exact = deep_trap_count_pmf_at(law, m, l) / (1.0 - p_zero);
        finite_m.push_back(exact);
        json tgt = heavy ? json(deep_trap_count_pmf(law.alpha(), l)) : json(nullptr);
        est.push_back(estimator("cond_pmf_l=" + std::to_string(l), p, se, tgt));
        est.push_back(estimator("cond_pmf_exact_m_l=" + std::to_string(l), exact, nullptr, tgt));
        plot.push_back({{"x", l}, {"y", p}, {"y_err", se}});
    }
    if (cond > 0.0) {
        // pmf derivatives stop at order 8, so bins run to l = 7 with the rest lumped
        const std::size_t top = std::min<std::size_t>(hist.size() - 1, 7);
        std::vector<std::uint64_t> obs(hist.begin() + 1, hist.begin() + 1 + top);
        for (std::size_t l = top + 1; l < hist.size(); ++l) obs.back() += hist[l];
        std::vector<double> e(obs.size());
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < e.size(); ++i) {
            e[i] = deep_trap_count_pmf_at(law, m, static_cast<int>(i + 1)) / (1.0 - p_zero);
            acc += e[i];
        }
        e.back() = std::max(0.0, 1.0 - acc);
        try {
            est.push_back(estimator("cond_pmf_fit_exact_m", nullptr, nullptr, nullptr,
                                    stats::chi_square_gof(obs, e).p_value));
        } catch (const DegenerateBins&) {
        }
    }
    out["finite_m_cond_pmf"] = finite_m;
    out["plot"] = plot;
    return est;
}

json summarize_return(const std::vector<json>& records, json& out) {
    double worst = 0.0;
    json plot = json::array();
    for (const auto& r : records) {
        worst = std::max(worst, r.at("rel_err").get<double>());
        plot.push_back({{"x", r.at("vertices")}, {"y", r.at("rel_err")}, {"y_err", nullptr}});
    }
    out["plot"] = plot;
    return json::array({estimator("max_rel_err", worst, nullptr, 0.0), estimator("fixtures", records.size())});
}

json summarize_supercritical(const ExperimentConfig& c, const OffspringLaw& law, const RegimeParams& rp,
                             const std::vector<json>& records, json& out) {
    auto heights = merge_hist(records, "height_hist");
    auto degrees = merge_hist(records, "backbone_degree_hist");
    double n = 0.0;
    for (auto h : heights) n += static_cast<double>(h);
    json est = json::array(), plot = json::array();
    est.push_back(estimator("branches", n));
    std::vector<double> x, y;
    for (std::uint64_t k = c.tail_min; k <= c.tail_max; ++k) {
        double above = 0.0;
        for (std::size_t h = k + 1; h < heights.size(); ++h) above += static_cast<double>(heights[h]);
        if (above <= 0.0) continue;
        const double p = above / n;
        x.push_back(static_cast<double>(k));
        y.push_back(std::log(p));
        plot.push_back({{"x", k}, {"y", std::log(p)}, {"y_err", std::sqrt((1.0 - p) / above)}});
    }
    const double log_fq = std::log(rp.fq_prime);
    if (x.size() >= 2) {
        stats::LinearFit f = stats::linear_fit(x, y);
        est.push_back(estimator("log_tail_slope", f.slope, f.slope_se, log_fq));
        const double cstar = supercritical_branch_tail_constant(law);
        est.push_back(estimator("tail_constant_at_n_max", std::exp(y.back() - log_fq * x.back()), nullptr, cstar));
    } else {
        est.push_back(estimator("log_tail_slope", nullptr, nullptr, log_fq));
    }
    double dn = 0.0, dsum = 0.0;
    for (std::size_t k = 0; k < degrees.size(); ++k) {
        dn += static_cast<double>(degrees[k]);
        dsum += static_cast<double>(k * degrees[k]);
    }
    if (dn > 0.0 && degrees.size() > 2) {
        std::vector<std::uint64_t> obs(degrees.begin() + 1, degrees.end());
        std::vector<double> e(obs.size());
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < e.size(); ++i) {
            e[i] = backbone_offspring_pmf(law, rp.q, i + 1);
            acc += e[i];
        }
        e.back() = std::max(0.0, 1.0 - acc);
        json pv = nullptr;
        try {
            pv = stats::chi_square_gof(obs, e).p_value;
        } catch (const DegenerateBins&) {
        }
        est.push_back(estimator("backbone_mean_degree", dsum / dn, nullptr, rp.mu, pv));
    }
    out["plot"] = plot;
    return est;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + p.string());
    os << text;
    if (!os) throw IoError("write failed: " + p.string());
}

// Longest valid prefix of an existing records file.
std::vector<json> read_records(const fs::path& p, const std::string& hash, bool truncate_bad_tail) {
    std::vector<json> out;
    std::ifstream is(p, std::ios::binary);
    if (!is) return out;
    std::string line;
    std::uintmax_t good = 0;
    while (true) {
        std::streampos before = is.tellg();
        if (!std::getline(is, line)) break;
        if (is.eof()) break;  // final line without newline is truncated
        json r;
        try {
            r = json::parse(line);
        } catch (const json::exception&) {
            break;
        }
        if (r.value("config_hash", "") != hash)
            throw ConfigError("records in " + p.string() + " belong to a different configuration");
        if (r.value("replica", std::uint64_t{0}) != out.size()) break;
        out.push_back(std::move(r));
        good = static_cast<std::uintmax_t>(before) + line.size() + 1;
    }
    is.close();
    if (truncate_bad_tail && fs::file_size(p) != good) fs::resize_file(p, good);
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    static const std::set<std::string> known{
        "kind",        "law",       "beta",        "regime_check", "min_level",    "max_level",
        "observable",  "min_steps", "max_steps",   "replicas",     "step_budget",  "node_budget",
        "master_seed", "out",       "engine",      "excursion_cap", "threshold",   "branches",
        "margin",      "depth",     "tail_min",    "tail_max",     "max_vertices", "laplace_s",
        "grid"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("unknown config field '" + k + "'");
    ExperimentConfig c;
    take(j, "kind", c.kind);
    if (!kKinds.count(c.kind)) throw ConfigError("unknown experiment kind '" + c.kind + "'");
    if (j.contains("law")) c.law = j.at("law");
    take(j, "beta", c.beta);
    take(j, "regime_check", c.regime_check);
    take(j, "min_level", c.min_level);
    take(j, "max_level", c.max_level);
    take(j, "observable", c.observable);
    take(j, "min_steps", c.min_steps);
    take(j, "max_steps", c.max_steps);
    take(j, "replicas", c.replicas);
    take(j, "step_budget", c.step_budget);
    take(j, "node_budget", c.node_budget);
    take(j, "master_seed", c.master_seed);
    take(j, "out", c.out);
    take(j, "engine", c.engine);
    take(j, "excursion_cap", c.excursion_cap);
    take(j, "threshold", c.threshold);
    take(j, "branches", c.branches);
    take(j, "margin", c.margin);
    take(j, "depth", c.depth);
    take(j, "tail_min", c.tail_min);
    take(j, "tail_max", c.tail_max);
    take(j, "max_vertices", c.max_vertices);
    take(j, "laplace_s", c.laplace_s);
    if (j.contains("grid")) c.grid = j.at("grid");

    if (c.replicas < 1) throw ConfigError("replicas must be >= 1");
    if (c.step_budget < 1 || c.node_budget < 1) throw ConfigError("budgets must be positive");
    if (c.observable != "hitting" && c.observable != "distance") throw ConfigError("observable must be hitting or distance");
    if (c.engine != "step" && c.engine != "aggregated") throw ConfigError("engine must be step or aggregated");
    if (c.kind == "phase-sweep") {
        if (!c.grid.is_object() || !c.grid.contains("mu") || !c.grid.contains("beta"))
            throw ConfigError("phase-sweep needs grid.mu and grid.beta");
        return c;
    }
    OffspringLaw law = make_law(c.law);
    if (!(c.beta > 0.0) || !std::isfinite(c.beta)) throw ConfigError("beta must be positive");
    if (c.kind == "walk-scaling") {
        if (c.observable == "hitting" && (c.max_level < c.min_level || c.max_level < 1))
            throw ConfigError("walk-scaling needs 1 <= min_level <= max_level");
        if (c.observable == "distance" && (c.max_steps < c.min_steps || c.max_steps < 1))
            throw ConfigError("walk-scaling needs 1 <= min_steps <= max_steps");
        if (c.engine == "aggregated" && (c.observable != "hitting" || !(law.mean() < 1.0)))
            throw ConfigError("aggregated engine handles hitting times on subcritical laws only");
    }
    if (c.kind == "excursion-law" && (c.max_level <= c.margin + 1))
        throw ConfigError("excursion-law needs max_level > margin + 1");
    if (c.kind == "supercritical-tail" && (c.tail_max < c.tail_min || c.depth < 1))
        throw ConfigError("supercritical-tail needs depth >= 1 and tail_min <= tail_max");
    if (c.regime_check) {
        RegimeParams rp = regime_params(law, c.beta);
        const bool sub = law.mean() < 1.0;
        const bool transient = c.beta > 1.0 && rp.regime != Regime::Recurrent &&
                               rp.regime != Regime::CriticalUnsupported;
        if ((c.kind == "walk-scaling" || c.kind == "excursion-law") && !transient)
            throw ConfigError(std::string("walk needs a transient regime, got ") + regime_name(rp.regime));
        if (c.kind == "walk-scaling" && rp.regime == Regime::Boundary)
            throw ConfigError("walk-scaling has no scaling target on the boundary beta mu = 1");
        if ((c.kind == "excursion-law" || c.kind == "deep-trap-count" || c.kind == "return-time-check") && !sub)
            throw ConfigError(c.kind + " needs a subcritical law");
        if (c.kind == "supercritical-tail" && sub) throw ConfigError("supercritical-tail needs mean > 1");
        if (c.kind == "return-time-check" && !(c.beta > 1.0)) throw ConfigError("return-time-check needs beta > 1");
    }
    return c;
}

json ExperimentConfig::to_json() const {
    return {{"kind", kind},
            {"law", law},
            {"beta", beta},
            {"regime_check", regime_check},
            {"min_level", min_level},
            {"max_level", max_level},
            {"observable", observable},
            {"min_steps", min_steps},
            {"max_steps", max_steps},
            {"replicas", replicas},
            {"step_budget", step_budget},
            {"node_budget", node_budget},
            {"master_seed", master_seed},
            {"out", out},
            {"engine", engine},
            {"excursion_cap", excursion_cap},
            {"threshold", threshold},
            {"branches", branches},
            {"margin", margin},
            {"depth", depth},
            {"tail_min", tail_min},
            {"tail_max", tail_max},
            {"max_vertices", max_vertices},
            {"laplace_s", laplace_s},
            {"grid", grid}};
}

std::string ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("out");
    j.erase("replicas");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read config " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return ExperimentConfig::from_json(j);
}

OffspringLaw make_law(const json& spec) {
    if (!spec.is_object() || !spec.contains("family")) throw ConfigError("law needs a family");
    try {
        const std::string fam = spec.at("family").get<std::string>();
        if (fam == "geometric") {
            if (spec.contains("a")) return OffspringLaw::geometric(spec.at("a").get<double>());
            if (spec.contains("mean")) {
                const double m = spec.at("mean").get<double>();
                return OffspringLaw::geometric(m / (1.0 + m));
            }
            throw ConfigError("geometric law needs a or mean");
        }
        if (fam == "finite") return OffspringLaw::finite(spec.at("pmf").get<std::vector<double>>());
        if (fam == "power_tail") {
            const double alpha = spec.at("alpha").get<double>();
            const std::uint64_t kmax = spec.value("k_max", kDefaultKmax);
            if (spec.contains("p0")) return OffspringLaw::power_tail(alpha, spec.at("p0").get<double>(), kmax);
            if (spec.contains("mean"))
                return OffspringLaw::power_tail_with_mean(alpha, spec.at("mean").get<double>(), kmax);
            throw ConfigError("power_tail law needs p0 or mean");
        }
        throw ConfigError("unknown law family '" + fam + "'");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("law: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("law: ") + e.what());
    }
}

json run_replica(const ExperimentConfig& c, std::uint64_t replica) { return run_replica(c, make_law(c.law), replica); }

json run_replica(const ExperimentConfig& c, const OffspringLaw& law, std::uint64_t replica) {
    const SeedStream s{c.master_seed, replica};
    json r;
    if (c.kind == "walk-scaling")
        r = walk_scaling_replica(c, law, s);
    else if (c.kind == "excursion-law")
        r = excursion_replica(c, law, s);
    else if (c.kind == "deep-trap-count")
        r = deep_trap_replica(c, law, s);
    else if (c.kind == "return-time-check")
        r = return_time_replica(c, law, s);
    else if (c.kind == "supercritical-tail")
        r = supercritical_replica(c, law, s);
    else
        throw ConfigError("kind " + c.kind + " has no replicas");
    r["replica"] = replica;
    r["stream"] = replica;
    r["config_hash"] = c.hash();
    r["regime"] = regime_name(regime_params(law, c.beta).regime);
    return r;
}

json summarize(const ExperimentConfig& c, const std::vector<json>& records) {
    if (records.empty()) throw InsufficientData("no records to summarize");
    const OffspringLaw law = make_law(c.law);
    const RegimeParams rp = regime_params(law, c.beta);
    json out;
    out["kind"] = c.kind;
    out["config_hash"] = c.hash();
    out["replicas"] = records.size();
    out["law"] = law.describe();
    out["beta"] = c.beta;
    out["regime"] = regime_name(rp.regime);
    out["mu"] = rp.mu;
    out["q"] = rp.q;
    out["fq_prime"] = rp.fq_prime;
    out["gamma"] = rp.gamma > 0.0 ? json(rp.gamma) : json(nullptr);
    out["levels"] = json::array();
    json est;
    if (c.kind == "walk-scaling")
        est = summarize_walk(c, law, rp, records, out);
    else if (c.kind == "excursion-law")
        est = summarize_excursions(c, law, records, out);
    else if (c.kind == "deep-trap-count")
        est = summarize_deep(c, law, records, out);
    else if (c.kind == "return-time-check")
        est = summarize_return(records, out);
    else
        est = summarize_supercritical(c, law, rp, records, out);
    out["estimators"] = est;
    return out;
}

std::string csv_field(const json& v) {
    if (v.is_null()) return "null";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    return v.dump();
}

void emit_outputs(const ExperimentConfig& c, const std::vector<json>& records, const json& summary) {
    if (records.empty()) throw InsufficientData("emit_outputs: no records");
    const fs::path dir(c.out);
    std::ostringstream s, e, p;
    s << kSummaryHeader << '\n';
    for (const auto& r : summary.at("levels"))
        s << csv_field(r.at("level")) << ',' << csv_field(r.at("n")) << ',' << csv_field(r.at("median_delta")) << ','
          << csv_field(r.at("q25")) << ',' << csv_field(r.at("q75")) << ',' << csv_field(r.at("censored_frac"))
          << '\n';
    e << kEstimatorHeader << '\n';
    for (const auto& r : summary.at("estimators"))
        e << csv_field(r.at("estimator")) << ',' << csv_field(r.at("value")) << ',' << csv_field(r.at("se")) << ','
          << csv_field(r.at("target")) << ',' << csv_field(r.at("p_value")) << '\n';
    p << kPlotHeader << '\n';
    for (const auto& r : summary.value("plot", json::array()))
        p << csv_field(r.at("x")) << ',' << csv_field(r.at("y")) << ',' << csv_field(r.at("y_err")) << '\n';
    write_text(dir / "summary.csv", s.str());
    write_text(dir / "estimators.csv", e.str());
    write_text(dir / "plot.csv", p.str());
    write_text(dir / "summary.json", summary.dump(2) + "\n");
}

std::string phase_sweep_csv(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "mu,beta,alpha,regime,gamma,q,fq_prime\n";
    const json alpha = c.grid.value("alpha", json(nullptr));
    try {
        for (double mu : c.grid.at("mu").get<std::vector<double>>())
            for (double beta : c.grid.at("beta").get<std::vector<double>>()) {
                OffspringLaw law = alpha.is_null()
                                       ? OffspringLaw::geometric(mu / (1.0 + mu))
                                       : OffspringLaw::power_tail_with_mean(alpha.get<double>(), mu, 100'000);
                RegimeParams rp = regime_params(law, beta);
                os << csv_field(mu) << ',' << csv_field(beta) << ',' << csv_field(alpha) << ','
                   << regime_name(rp.regime) << ',' << csv_field(rp.gamma > 0.0 ? json(rp.gamma) : json(nullptr))
                   << ',' << csv_field(rp.q) << ',' << csv_field(rp.fq_prime) << '\n';
            }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    return os.str();
}

json run_experiment(const ExperimentConfig& c, const RunOptions& opt) {
    const fs::path dir(c.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "config.json", c.to_json().dump(2) + "\n");
    if (c.kind == "phase-sweep") {
        std::string csv = phase_sweep_csv(c);
        write_text(dir / "phase.csv", csv);
        return {{"kind", c.kind}, {"cells", std::count(csv.begin(), csv.end(), '\n') - 1}};
    }

    const std::string hash = c.hash();
    const fs::path rec_path = dir / "records.jsonl";
    std::vector<json> records;
    if (opt.resume && fs::exists(rec_path)) records = read_records(rec_path, hash, true);
    if (records.size() > c.replicas) records.resize(c.replicas);
    const std::uint64_t start = records.size();
    const OffspringLaw law = make_law(c.law);

    std::ofstream rec(rec_path, std::ios::binary | (start > 0 ? std::ios::app : std::ios::trunc));
    std::ofstream timing(dir / "timing.jsonl", std::ios::binary | (start > 0 ? std::ios::app : std::ios::trunc));
    if (!rec || !timing) throw IoError("cannot open record files in " + dir.string());
    if (opt.log && start > 0) *opt.log << "resuming after " << start << " completed replicas\n";

    unsigned jobs = opt.jobs ? opt.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::uint64_t>(jobs, c.replicas - start));
    std::atomic<std::uint64_t> next{start};
    std::mutex mu;
    std::condition_variable cv;
    std::map<std::uint64_t, std::pair<json, double>> done;
    std::exception_ptr failure;
    std::atomic<bool> stop{false};

    auto worker = [&] {
        while (!stop) {
            const std::uint64_t i = next++;
            if (i >= c.replicas) return;
            try {
                auto t0 = std::chrono::steady_clock::now();
                json r = run_replica(c, law, i);
                double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::lock_guard lk(mu);
                done.emplace(i, std::make_pair(std::move(r), secs));
            } catch (...) {
                std::lock_guard lk(mu);
                if (!failure) failure = std::current_exception();
                stop = true;
            }
            cv.notify_all();
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);

    for (std::uint64_t i = start; i < c.replicas; ++i) {
        std::pair<json, double> item;
        {
            std::unique_lock lk(mu);
            cv.wait(lk, [&] { return done.count(i) || failure; });
            if (!done.count(i)) break;
            item = std::move(done.at(i));
            done.erase(i);
        }
        rec << item.first.dump() << '\n';
        rec.flush();
        timing << json{{"replica", i}, {"wall_seconds", item.second}}.dump() << '\n';
        if (!rec) throw IoError("write failed: " + rec_path.string());
        if (opt.log && (i + 1) % std::max<std::uint64_t>(1, c.replicas / 10) == 0)
            *opt.log << "replica " << i + 1 << "/" << c.replicas << "\n";
        records.push_back(std::move(item.first));
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    rec.close();

    json summary = summarize(c, records);
    emit_outputs(c, records, summary);
    return summary;
}

}  // namespace gwe::cli
