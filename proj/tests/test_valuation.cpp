#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>

#include "chsim/scenario.hpp"
#include "chsim/valuation.hpp"

using namespace chsim;

namespace {

Decomposition basis_decomposition(const ComplexMatrix& u, const std::vector<std::vector<int>>& cells) {
    std::vector<Projector> projectors;
    for (const auto& cell : cells) {
        ComplexMatrix p = ComplexMatrix::zero(u.dim());
        for (int c : cell) {
            std::vector<Complex> col(static_cast<std::size_t>(u.dim()));
            for (int i = 0; i < u.dim(); ++i) col[static_cast<std::size_t>(i)] = u(i, c);
            const StateVector v{col};
            p += outer_product(v, v);
        }
        projectors.emplace_back(std::move(p));
    }
    return Decomposition(std::move(projectors));
}

/// Exhaustive reference: try all 2^n truth assignments.
bool exhaustive_satisfiable(const ValuationProblem& problem) {
    const std::size_t n = problem.identifier_count();
    for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
        bool ok = true;
        for (const auto& context : problem.contexts()) {
            int ones = 0;
            for (std::size_t id : context) ones += static_cast<int>((mask >> id) & 1u);
            if (ones != 1) {
                ok = false;
                break;
            }
        }
        if (ok) return true;
    }
    return false;
}

std::vector<std::vector<int>> random_cells(int dim, Rng& rng) {
    return random_partition(dim, 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(dim - 1))),
                            rng);
}

}  // namespace

TEST_CASE("a lone sample space always admits a valuation") {
    Rng rng(151);
    const ComplexMatrix u = random_unitary(3, rng);
    const DetectionResult detection = detect_shared_projectors({basis_decomposition(u, {{0}, {1}, {2}})});
    const SearchResult result = search_valuation(detection.problem);
    REQUIRE(result.valuation.has_value());
    CHECK(satisfies(detection.problem, *result.valuation));
}

TEST_CASE("disjoint contexts admit independent choices") {
    Rng rng(157);
    const ComplexMatrix u = random_unitary(4, rng);
    const ComplexMatrix w = random_unitary(4, rng);
    const DetectionResult detection = detect_shared_projectors(
        {basis_decomposition(u, {{0}, {1}, {2, 3}}), basis_decomposition(w, {{0, 1}, {2, 3}})});
    CHECK(detection.bridges.empty());
    const SearchResult result = search_valuation(detection.problem);
    REQUIRE(result.valuation.has_value());
    CHECK(satisfies(detection.problem, *result.valuation));
}

TEST_CASE("search agrees with exhaustive enumeration on small instances") {
    Rng rng(163);
    for (int trial = 0; trial < 30; ++trial) {
        const int dim = 3 + static_cast<int>(rng.below(2));
        const ComplexMatrix u = random_unitary(dim, rng);
        std::vector<Decomposition> contexts;
        const int n_ctx = 2 + static_cast<int>(rng.below(3));
        for (int c = 0; c < n_ctx; ++c) contexts.push_back(basis_decomposition(u, random_cells(dim, rng)));
        const DetectionResult detection = detect_shared_projectors(contexts);
        if (detection.problem.identifier_count() > 16) continue;

        const SearchResult result = search_valuation(detection.problem);
        CHECK(result.valuation.has_value() == exhaustive_satisfiable(detection.problem));
        if (result.valuation) CHECK(satisfies(detection.problem, *result.valuation));
        CHECK(result.nodes_examined >= 1);
    }
}

TEST_CASE("acyclic overlap chains always admit a valuation") {
    Rng rng(167);
    for (int trial = 0; trial < 10; ++trial) {
        const ComplexMatrix u = random_unitary(4, rng);
        // A chain of contexts, each sharing one block with its successor.
        std::vector<Decomposition> contexts{
            basis_decomposition(u, {{0, 1}, {2}, {3}}),
            basis_decomposition(u, {{0, 1}, {2, 3}}),
            basis_decomposition(u, {{0}, {1}, {2, 3}}),
        };
        const DetectionResult detection = detect_shared_projectors(contexts);
        CHECK(detection.bridges.size() == 2);
        const SearchResult result = search_valuation(detection.problem);
        REQUIRE(result.valuation.has_value());
        CHECK(satisfies(detection.problem, *result.valuation));
    }
}

TEST_CASE("returned valuations satisfy exactly-one-per-context by reinspection") {
    Rng rng(173);
    const ComplexMatrix u = random_unitary(4, rng);
    std::vector<Decomposition> contexts{basis_decomposition(u, {{0}, {1}, {2}, {3}}),
                                        basis_decomposition(u, {{0, 1}, {2, 3}}),
                                        basis_decomposition(u, {{0, 1, 2}, {3}})};
    const DetectionResult detection = detect_shared_projectors(contexts);
    const SearchResult result = search_valuation(detection.problem);
    REQUIRE(result.valuation.has_value());
    for (const auto& context : detection.problem.contexts()) {
        int ones = 0;
        for (std::size_t id : context)
            ones += result.valuation->assignment.at(detection.problem.identifiers()[id]);
        CHECK(ones == 1);
    }
}

TEST_CASE("duplicate contexts share every identifier") {
    Rng rng(179);
    const ComplexMatrix u = random_unitary(3, rng);
    const Decomposition d = basis_decomposition(u, {{0}, {1}, {2}});
    const DetectionResult detection = detect_shared_projectors({d, d});
    CHECK(detection.problem.identifier_count() == 3);
    CHECK(detection.bridges.size() == 3);
    CHECK(detection.noncommuting.empty());
}

TEST_CASE("the two spin-component contexts share nothing and do not commute") {
    ComplexMatrix sx(2);
    sx(0, 1) = 0.5;
    sx(1, 0) = 0.5;
    const DetectionResult detection = detect_shared_projectors(
        {spectral_decompose(ComplexMatrix::diagonal({0.5, -0.5})).decomposition(),
         spectral_decompose(sx).decomposition()});
    CHECK(detection.problem.identifier_count() == 4);
    CHECK(detection.bridges.empty());
    REQUIRE_FALSE(detection.noncommuting.empty());
    CHECK(detection.noncommuting.front().commutator_norm > tol::commuting);
}

TEST_CASE("a reused projector is pooled into one identifier") {
    Rng rng(181);
    const ComplexMatrix u = random_unitary(4, rng);
    // The {0,1} block appears in both contexts, nothing else does.
    const DetectionResult detection = detect_shared_projectors(
        {basis_decomposition(u, {{0, 1}, {2}, {3}}), basis_decomposition(u, {{0, 1}, {2, 3}})});
    REQUIRE(detection.bridges.size() == 1);
    CHECK(detection.bridges.front().contexts == std::vector<std::size_t>{0, 1});
}

TEST_CASE("the search refuses oversized pools") {
    std::vector<Projector> pool;
    std::vector<std::string> ids;
    std::vector<std::vector<std::size_t>> contexts;
    // 65 copies of a two-cell context with disjoint identifiers, except the
    // pool is inflated past the bound.
    for (int k = 0; k < 33; ++k) {
        pool.push_back(Projector(ComplexMatrix::diagonal({1, 0})));
        ids.push_back("p" + std::to_string(k));
        pool.push_back(Projector(ComplexMatrix::diagonal({0, 1})));
        ids.push_back("q" + std::to_string(k));
        contexts.push_back({static_cast<std::size_t>(2 * k), static_cast<std::size_t>(2 * k + 1)});
    }
    const ValuationProblem problem(std::move(pool), std::move(ids), std::move(contexts));
    CHECK(problem.identifier_count() == 66);
    CHECK_THROWS_AS(search_valuation(problem), CapacityError);
}

TEST_CASE("valuation problems validate their contexts as decompositions") {
    std::vector<Projector> pool{Projector(ComplexMatrix::diagonal({1, 0})),
                                Projector(ComplexMatrix::diagonal({1, 0}))};
    // Two copies of the same projector neither sum to identity nor stay
    // orthogonal, so the context is rejected.
    CHECK_THROWS_AS(ValuationProblem(pool, {"q0", "q1"}, {{0, 1}}), ValidationError);
}

TEST_CASE("the shipped eighteen-ray fixture is uncolorable") {
    const char* fixtures = std::getenv("CHSIM_FIXTURES");
    if (fixtures == nullptr) SKIP("CHSIM_FIXTURES not set");
    std::ifstream in(std::string(fixtures) + "/valuation_ks18.json");
    REQUIRE(in.good());
    const Json doc = Json::parse(in);

    std::vector<Decomposition> contexts;
    for (const Json& spec : doc["payload"]["contexts"])
        contexts.push_back(detail::parse_decomposition(spec, "contexts"));
    REQUIRE(contexts.size() == 9);

    const DetectionResult detection = detect_shared_projectors(contexts);
    CHECK(detection.problem.identifier_count() == 18);
    CHECK(detection.bridges.size() == 18);  // every ray appears in two contexts

    const SearchResult result = search_valuation(detection.problem);
    CHECK_FALSE(result.valuation.has_value());
    CHECK(result.nodes_examined > 0);
    CHECK(result.branches_pruned > 0);
}
