#ifndef KDL_PROBLEMMA_HPP
#define KDL_PROBLEMMA_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "rng.hpp"

namespace kdl {

/// One finite probability space (a coordinate of the product space).
struct VarSpace {
    std::vector<double> values;
    std::vector<double> weights;  // empty = uniform

    double weight(int k) const {
        if (weights.empty()) return 1.0 / static_cast<double>(values.size());
        return weights[static_cast<std::size_t>(k)];
    }
};

/// A localized bad event: a predicate on the full assignment that only reads
/// the declared coordinates.
struct BadSet {
    std::string label;
    std::vector<int> deps;
    std::function<bool(const std::vector<double>&)> hit;
};

struct SearchFailure : std::runtime_error {
    std::vector<std::string> surviving;
    std::vector<double> assignment;  // the final (still bad) assignment
    explicit SearchFailure(std::vector<std::string> s, std::vector<double> a = {})
        : std::runtime_error("probability lemma search: budget exhausted"),
          surviving(std::move(s)),
          assignment(std::move(a)) {}
};

struct ProbLemmaOptions {
    int c1 = 0;             // every bad set depends on < c1 variables
    int c2 = 0;             // every variable is relevant to < c2 bad sets
    double epsilon = 0.0;   // declared bound on each bad-set probability
    int budget = 256;       // resampling rounds allowed in the fallback
    std::uint64_t seed = 1;
    long long exact_limit = 4096;  // joint-assignment cap for exact conditionals
    bool exact_greedy = true;      // false: skip conditional search (costly predicates)
};

struct ProbLemmaResult {
    std::vector<int> choice;           // chosen value index per variable
    std::vector<double> assignment;    // chosen values
    int greedy_exact_vars = 0;         // variables picked by conditional search
    int resample_rounds = 0;           // fallback rounds consumed
    bool growth_rule_held = true;      // every greedy step kept growth <= c2
};

namespace detail {

/// Conditional probability of the bad set given the assigned coordinates,
/// by exact enumeration of the unassigned relevant coordinates; -1.0 when the
/// joint space is too large to enumerate.
inline double conditional_probability(const BadSet& bs, const std::vector<VarSpace>& vars,
                                      const std::vector<int>& choice, long long limit,
                                      std::vector<double>& scratch) {
    std::vector<int> open;
    long long joint = 1;
    for (int d : bs.deps) {
        if (choice[static_cast<std::size_t>(d)] >= 0) continue;
        open.push_back(d);
        joint *= static_cast<long long>(vars[static_cast<std::size_t>(d)].values.size());
        if (joint > limit) return -1.0;
    }
    for (std::size_t i = 0; i < vars.size(); ++i) {
        int c = choice[i] >= 0 ? choice[i] : 0;
        scratch[i] = vars[i].values[static_cast<std::size_t>(c)];
    }
    std::vector<int> idx(open.size(), 0);
    double prob = 0.0;
    while (true) {
        double wt = 1.0;
        for (std::size_t k = 0; k < open.size(); ++k) {
            const VarSpace& sp = vars[static_cast<std::size_t>(open[k])];
            scratch[static_cast<std::size_t>(open[k])] = sp.values[static_cast<std::size_t>(idx[k])];
            wt *= sp.weight(idx[k]);
        }
        if (bs.hit(scratch)) prob += wt;
        std::size_t k = 0;
        for (; k < open.size(); ++k) {
            if (++idx[k] < static_cast<int>(vars[static_cast<std::size_t>(open[k])].values.size()))
                break;
            idx[k] = 0;
        }
        if (k == open.size()) break;
    }
    return prob;
}

inline int draw_index(const VarSpace& sp, Rng& rng) {
    if (sp.weights.empty()) return static_cast<int>(rng.below(sp.values.size()));
    double total = 0.0;
    for (double w : sp.weights) total += w;
    double u = rng.u01() * total;
    for (std::size_t k = 0; k < sp.weights.size(); ++k) {
        u -= sp.weights[k];
        if (u <= 0.0) return static_cast<int>(k);
    }
    return static_cast<int>(sp.weights.size()) - 1;
}

}  // namespace detail

/// Sequential constructive search for a point of the product space avoiding
/// every bad set: variables are fixed one at a time, each chosen so that no
/// affected conditional probability grows by more than a factor c2 (exact
/// conditionals where enumerable), with bounded-restart resampling of the
/// variables of any surviving bad set as a fallback.  Deterministic per seed.
inline ProbLemmaResult probability_lemma_solve(const std::vector<VarSpace>& vars,
                                               const std::vector<BadSet>& bad_sets,
                                               const ProbLemmaOptions& opt) {
    const int nv = static_cast<int>(vars.size());
    for (const VarSpace& sp : vars)
        if (sp.values.empty()) throw InvalidInput("probability_lemma_solve: empty value space");
    std::vector<std::vector<int>> sets_of_var(static_cast<std::size_t>(nv));
    for (std::size_t a = 0; a < bad_sets.size(); ++a) {
        if (static_cast<int>(bad_sets[a].deps.size()) >= opt.c1)
            throw InvalidInput("probability_lemma_solve: bad set depends on >= c1 variables");
        for (int d : bad_sets[a].deps) {
            if (d < 0 || d >= nv) throw InvalidInput("probability_lemma_solve: dependency out of range");
            sets_of_var[static_cast<std::size_t>(d)].push_back(static_cast<int>(a));
        }
    }
    for (const auto& lst : sets_of_var)
        if (static_cast<int>(lst.size()) >= opt.c2)
            throw InvalidInput("probability_lemma_solve: variable relevant to >= c2 bad sets");

    std::vector<double> scratch(static_cast<std::size_t>(nv), 0.0);
    std::vector<int> choice(static_cast<std::size_t>(nv), -1);

    // Declared per-set probability bound, verified where enumerable.
    for (const BadSet& bs : bad_sets) {
        double p = detail::conditional_probability(bs, vars, choice, opt.exact_limit, scratch);
        if (p >= 0.0 && p >= opt.epsilon)
            throw InvalidInput("probability_lemma_solve: bad set probability >= epsilon (" +
                               bs.label + ")");
    }

    Rng rng(opt.seed);
    ProbLemmaResult res;

    // Sequential pass with the growth rule.
    for (int i = 0; i < nv; ++i) {
        const VarSpace& sp = vars[static_cast<std::size_t>(i)];
        const auto& affected = sets_of_var[static_cast<std::size_t>(i)];
        bool exact = opt.exact_greedy && !affected.empty();
        std::vector<double> before(affected.size(), -1.0);
        for (std::size_t a = 0; exact && a < affected.size(); ++a) {
            before[a] = detail::conditional_probability(
                bad_sets[static_cast<std::size_t>(affected[a])], vars, choice, opt.exact_limit,
                scratch);
            if (before[a] < 0.0) exact = false;
        }
        if (!exact) {
            choice[static_cast<std::size_t>(i)] = detail::draw_index(sp, rng);
            continue;
        }
        int best = -1;
        bool best_ok = false;
        double best_worst = 1e300;
        for (int c = 0; c < static_cast<int>(sp.values.size()); ++c) {
            choice[static_cast<std::size_t>(i)] = c;
            bool ok = true;
            double worst = 0.0;
            for (std::size_t a = 0; a < affected.size(); ++a) {
                double after = detail::conditional_probability(
                    bad_sets[static_cast<std::size_t>(affected[a])], vars, choice,
                    opt.exact_limit, scratch);
                worst = std::max(worst, after);
                if (after > static_cast<double>(opt.c2) * before[a] + 1e-15) ok = false;
            }
            if (best < 0 || (ok && !best_ok) || (ok == best_ok && worst < best_worst)) {
                best = c;
                best_ok = ok;
                best_worst = worst;
            }
        }
        choice[static_cast<std::size_t>(i)] = best;
        if (!best_ok) res.growth_rule_held = false;
        ++res.greedy_exact_vars;
    }

    auto value_of = [&](int i) {
        return vars[static_cast<std::size_t>(i)]
            .values[static_cast<std::size_t>(choice[static_cast<std::size_t>(i)])];
    };
    auto violated_now = [&](const BadSet& bs) {
        for (int i = 0; i < nv; ++i) scratch[static_cast<std::size_t>(i)] = value_of(i);
        return bs.hit(scratch);
    };

    std::vector<char> bad(bad_sets.size(), 0);
    for (std::size_t a = 0; a < bad_sets.size(); ++a) bad[a] = violated_now(bad_sets[a]) ? 1 : 0;

    // Fallback: resample the variables of a surviving bad set.
    for (int round = 0; round < opt.budget; ++round) {
        int target = -1;
        for (std::size_t a = 0; a < bad_sets.size(); ++a)
            if (bad[a]) {
                target = static_cast<int>(a);
                break;
            }
        if (target < 0) break;
        ++res.resample_rounds;
        std::vector<char> touched(bad_sets.size(), 0);
        for (int d : bad_sets[static_cast<std::size_t>(target)].deps) {
            choice[static_cast<std::size_t>(d)] =
                detail::draw_index(vars[static_cast<std::size_t>(d)], rng);
            for (int a : sets_of_var[static_cast<std::size_t>(d)]) touched[static_cast<std::size_t>(a)] = 1;
        }
        for (std::size_t a = 0; a < bad_sets.size(); ++a)
            if (touched[a]) bad[a] = violated_now(bad_sets[a]) ? 1 : 0;
    }

    std::vector<std::string> surviving;
    for (std::size_t a = 0; a < bad_sets.size(); ++a)
        if (bad[a]) surviving.push_back(bad_sets[a].label);
    if (!surviving.empty()) {
        std::vector<double> final_vals(static_cast<std::size_t>(nv));
        for (int i = 0; i < nv; ++i) final_vals[static_cast<std::size_t>(i)] = value_of(i);
        throw SearchFailure(std::move(surviving), std::move(final_vals));
    }

    res.choice = choice;
    res.assignment.resize(static_cast<std::size_t>(nv));
    for (int i = 0; i < nv; ++i) res.assignment[static_cast<std::size_t>(i)] = value_of(i);
    return res;
}

}  // namespace kdl

#endif  // KDL_PROBLEMMA_HPP
