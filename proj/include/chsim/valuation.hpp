#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chsim/properties.hpp"

namespace chsim {

/// Search space for noncontextual {0,1} valuations over overlapping
/// decompositions.
///
/// A full "every observable has a value" assignment reduces to this projector
/// level: assigning values to all observables containing a projector P in
/// their spectral representation forces a truth value (0 or 1) on P itself,
/// via the indicator observable of P. A valuation here gives each pooled
/// projector one truth value, the same in every context it appears in (the
/// noncontextuality premise), with exactly one true projector per context
/// (sample spaces are exhaustive and mutually exclusive). If no such
/// assignment exists, no value assignment to the underlying observables can
/// exist either.
class ValuationProblem {
public:
    ValuationProblem(std::vector<Projector> pool, std::vector<std::string> identifiers,
                     std::vector<std::vector<std::size_t>> contexts)
        : pool_(std::move(pool)), identifiers_(std::move(identifiers)), contexts_(std::move(contexts)) {
        if (pool_.size() != identifiers_.size())
            throw ValidationError("identifier count does not match pool size");
        for (const auto& context : contexts_) {
            std::vector<Projector> members;
            for (std::size_t id : context) members.push_back(pool_.at(id));
            Decomposition check(std::move(members));  // validates completeness + orthogonality
            (void)check;
        }
    }

    std::size_t identifier_count() const noexcept { return pool_.size(); }
    std::size_t context_count() const noexcept { return contexts_.size(); }
    const std::vector<Projector>& pool() const noexcept { return pool_; }
    const std::vector<std::string>& identifiers() const noexcept { return identifiers_; }
    const std::vector<std::vector<std::size_t>>& contexts() const noexcept { return contexts_; }

private:
    std::vector<Projector> pool_;
    std::vector<std::string> identifiers_;
    std::vector<std::vector<std::size_t>> contexts_;
};

/// Truth assignment: identifier -> {0, 1}.
struct Valuation {
    std::map<std::string, int> assignment;
};

/// One true projector per context, consistently across shared identifiers.
inline bool satisfies(const ValuationProblem& problem, const Valuation& v) {
    for (const auto& context : problem.contexts()) {
        int ones = 0;
        for (std::size_t id : context) {
            const auto it = v.assignment.find(problem.identifiers()[id]);
            if (it == v.assignment.end()) return false;
            if (it->second != 0 && it->second != 1) return false;
            ones += it->second;
        }
        if (ones != 1) return false;
    }
    return true;
}

struct SearchResult {
    std::optional<Valuation> valuation;
    std::uint64_t nodes_examined = 0;   // context-assignments attempted
    std::uint64_t branches_pruned = 0;  // dead ends abandoned
};

/// Backtracking over contexts (most-overlapping first, stable order),
/// propagating shared identifiers. Either returns a satisfying valuation, or
/// certifies exhaustion with the node counts of the completed search.
inline SearchResult search_valuation(const ValuationProblem& problem) {
    if (problem.identifier_count() > static_cast<std::size_t>(tol::max_valuation_ids))
        throw CapacityError("problem has " + std::to_string(problem.identifier_count()) +
                            " identifiers, above the brute-force bound " +
                            std::to_string(tol::max_valuation_ids));

    const std::size_t n_ids = problem.identifier_count();
    const std::size_t n_ctx = problem.context_count();

    // Overlap degree: how many of a context's identifiers recur elsewhere.
    std::vector<int> appearances(n_ids, 0);
    for (const auto& context : problem.contexts())
        for (std::size_t id : context) ++appearances[id];
    std::vector<std::size_t> order(n_ctx);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        auto degree = [&](std::size_t c) {
            int d = 0;
            for (std::size_t id : problem.contexts()[c]) d += appearances[id] > 1 ? 1 : 0;
            return d;
        };
        return degree(a) > degree(b);
    });

    SearchResult result;
    std::vector<int> assign(n_ids, -1);  // -1 unset
    std::vector<std::size_t> trail;

    auto set_value = [&](std::size_t id, int value) {
        if (assign[id] == -1) {
            assign[id] = value;
            trail.push_back(id);
            return true;
        }
        return assign[id] == value;
    };

    std::function<bool(std::size_t)> dfs = [&](std::size_t depth) -> bool {
        if (depth == n_ctx) return true;
        const auto& context = problem.contexts()[order[depth]];

        std::optional<std::size_t> forced_true;
        for (std::size_t id : context)
            if (assign[id] == 1) {
                forced_true = id;
                break;
            }

        const std::size_t mark = trail.size();
        auto undo_to_mark = [&]() {
            while (trail.size() > mark) {
                assign[trail.back()] = -1;
                trail.pop_back();
            }
        };

        auto try_choice = [&](std::size_t chosen) -> bool {
            ++result.nodes_examined;
            bool ok = set_value(chosen, 1);
            for (std::size_t id : context) {
                if (!ok) break;
                if (id != chosen) ok = set_value(id, 0);
            }
            if (ok && dfs(depth + 1)) return true;
            ++result.branches_pruned;
            undo_to_mark();
            return false;
        };

        if (forced_true) return try_choice(*forced_true);
        for (std::size_t id : context) {
            if (assign[id] == 0) continue;
            if (try_choice(id)) return true;
        }
        return false;
    };

    if (dfs(0)) {
        Valuation v;
        for (std::size_t id = 0; id < n_ids; ++id)
            v.assignment[problem.identifiers()[id]] = assign[id] == 1 ? 1 : 0;
        if (!satisfies(problem, v))
            throw NumericError("internal search returned a non-satisfying valuation");
        result.valuation = std::move(v);
    }
    return result;
}

struct Bridge {
    std::string identifier;
    std::vector<std::size_t> contexts;  // the contexts sharing this projector
};

struct NoncommutingContexts {
    std::size_t context_a;
    std::size_t index_a;
    std::size_t context_b;
    std::size_t index_b;
    double commutator_norm;
};

struct DetectionResult {
    ValuationProblem problem;
    std::vector<Bridge> bridges;  // identifiers appearing in two or more contexts
    std::vector<NoncommutingContexts> noncommuting;
};

/// Pool projectors across raw decompositions by matrix equality, assigning
/// one identifier per equivalence class. Identifiers shared by several
/// contexts are the bridges along which valuations must agree; cross-context
/// pairs that fail to commute are flagged, since no common refinement backs
/// reasoning across such contexts.
inline DetectionResult detect_shared_projectors(const std::vector<Decomposition>& raw_contexts) {
    if (raw_contexts.empty()) throw ValidationError("need at least one context");
    const int dim = raw_contexts.front().dim();
    for (const Decomposition& d : raw_contexts)
        if (d.dim() != dim) throw ValidationError("contexts must share one dimension");

    std::vector<Projector> pool;
    std::vector<std::string> identifiers;
    std::vector<std::vector<std::size_t>> contexts;
    std::vector<std::vector<std::size_t>> appearing_in;  // per pooled id

    for (std::size_t c = 0; c < raw_contexts.size(); ++c) {
        std::vector<std::size_t> ids;
        for (const Projector& p : raw_contexts[c].projectors()) {
            std::size_t found = pool.size();
            for (std::size_t k = 0; k < pool.size(); ++k)
                if (projectors_equal(pool[k], p)) {
                    found = k;
                    break;
                }
            if (found == pool.size()) {
                pool.push_back(p);
                identifiers.push_back("q" + std::to_string(found));
                appearing_in.emplace_back();
            }
            ids.push_back(found);
            if (appearing_in[found].empty() || appearing_in[found].back() != c)
                appearing_in[found].push_back(c);
        }
        contexts.push_back(std::move(ids));
    }

    std::vector<Bridge> bridges;
    for (std::size_t k = 0; k < pool.size(); ++k)
        if (appearing_in[k].size() > 1) bridges.push_back(Bridge{identifiers[k], appearing_in[k]});

    std::vector<NoncommutingContexts> noncommuting;
    for (std::size_t a = 0; a < raw_contexts.size(); ++a)
        for (std::size_t b = a + 1; b < raw_contexts.size(); ++b) {
            bool flagged = false;
            for (std::size_t i = 0; i < raw_contexts[a].size() && !flagged; ++i)
                for (std::size_t j = 0; j < raw_contexts[b].size() && !flagged; ++j) {
                    const double norm = commutator_norm(raw_contexts[a][i].matrix(),
                                                        raw_contexts[b][j].matrix());
                    if (norm > tol::commuting) {
                        noncommuting.push_back(NoncommutingContexts{a, i, b, j, norm});
                        flagged = true;
                    }
                }
        }

    return DetectionResult{ValuationProblem(std::move(pool), std::move(identifiers), std::move(contexts)),
                           std::move(bridges), std::move(noncommuting)};
}

}  // namespace chsim
