#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chsim/matrix.hpp"

namespace chsim {

/// A quantum property: a Hermitian idempotent operator, identified with the
/// subspace it projects onto. Rank is derived from the trace, which must sit
/// within tolerance of an integer.
class Projector {
public:
    explicit Projector(ComplexMatrix matrix) : matrix_(std::move(matrix)) {
        if (!matrix_.is_hermitian(tol::projector))
            throw ValidationError("projector is not self-adjoint within tolerance");
        const double idem = frobenius_distance(matrix_ * matrix_, matrix_);
        if (idem > tol::projector)
            throw ValidationError("projector is not idempotent: ||P^2 - P||_F = " + std::to_string(idem));
        const double tr = matrix_.trace().real();
        rank_ = static_cast<int>(std::llround(tr));
        if (std::abs(tr - rank_) > tol::reconstruction || rank_ < 0)
            throw ValidationError("projector trace " + std::to_string(tr) + " is not a nonnegative integer");
    }

    /// Rank-1 projector onto the ray of a nonzero state.
    static Projector onto(const StateVector& psi) {
        const double n = psi.norm();
        if (n == 0.0)
            throw ValidationError("the zero vector spans no ray: a property that is never true");
        ComplexMatrix m = outer_product(psi, psi);
        m *= Complex{1.0 / (n * n), 0.0};
        return Projector(std::move(m));
    }

    static Projector identity(int dim) { return Projector(ComplexMatrix::identity(dim)); }
    static Projector zero(int dim) { return Projector(ComplexMatrix::zero(dim)); }

    const ComplexMatrix& matrix() const noexcept { return matrix_; }
    int dim() const noexcept { return matrix_.dim(); }
    int rank() const noexcept { return rank_; }

    Projector complement() const { return Projector(ComplexMatrix::identity(dim()) - matrix_); }

    /// Orthonormal basis of the range, read off the spectral representation.
    std::vector<StateVector> range_basis() const {
        std::vector<StateVector> basis;
        const Eigendecomposition e = hermitian_eigendecomposition(matrix_);
        for (std::size_t k = 0; k < e.eigenvalues.size(); ++k)
            if (e.eigenvalues[k] > 0.5) basis.push_back(e.eigenvectors[k]);
        return basis;
    }

private:
    ComplexMatrix matrix_;
    int rank_;
};

inline bool projectors_equal(const Projector& a, const Projector& b,
                             double tolerance = tol::orthogonality) {
    return a.dim() == b.dim() && frobenius_distance(a.matrix(), b.matrix()) <= tolerance;
}

/// An ordered set of mutually orthogonal projectors summing to the identity:
/// the quantum sample space. Labels key CLI reports and default to
/// "a0", "a1", ... when not supplied.
class Decomposition {
public:
    explicit Decomposition(std::vector<Projector> projectors, std::vector<std::string> labels = {})
        : projectors_(std::move(projectors)), labels_(std::move(labels)) {
        if (projectors_.empty()) throw ValidationError("decomposition needs at least one projector");
        const int d = projectors_.front().dim();
        ComplexMatrix sum = ComplexMatrix::zero(d);
        for (const Projector& p : projectors_) {
            if (p.dim() != d) throw ValidationError("decomposition members must share one dimension");
            sum += p.matrix();
        }
        const double defect = frobenius_distance(sum, ComplexMatrix::identity(d));
        if (defect > tol::completeness)
            throw ValidationError("projectors do not sum to identity: defect " + std::to_string(defect));
        for (std::size_t i = 0; i < projectors_.size(); ++i)
            for (std::size_t j = i + 1; j < projectors_.size(); ++j) {
                const double cross =
                    (projectors_[i].matrix() * projectors_[j].matrix()).frobenius_norm();
                if (cross > tol::orthogonality)
                    throw ValidationError("projectors " + std::to_string(i) + " and " + std::to_string(j) +
                                          " are not orthogonal: ||Pi Pj||_F = " + std::to_string(cross));
            }
        if (labels_.empty()) {
            labels_.reserve(projectors_.size());
            for (std::size_t i = 0; i < projectors_.size(); ++i)
                labels_.push_back("a" + std::to_string(i));
        } else if (labels_.size() != projectors_.size()) {
            throw ValidationError("label count does not match projector count");
        }
    }

    int dim() const noexcept { return projectors_.front().dim(); }
    std::size_t size() const noexcept { return projectors_.size(); }
    const Projector& operator[](std::size_t i) const { return projectors_.at(i); }
    const std::vector<Projector>& projectors() const noexcept { return projectors_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    std::vector<Projector> projectors_;
    std::vector<std::string> labels_;
};

/// Hermitian operator presented spectrally: distinct eigenvalues paired
/// one-to-one with the members of a decomposition of the identity.
class Observable {
public:
    Observable(std::vector<double> eigenvalues, Decomposition decomposition)
        : eigenvalues_(std::move(eigenvalues)), decomposition_(std::move(decomposition)) {
        if (eigenvalues_.size() != decomposition_.size())
            throw ValidationError("eigenvalue count does not match decomposition size");
        for (std::size_t i = 0; i < eigenvalues_.size(); ++i)
            for (std::size_t j = i + 1; j < eigenvalues_.size(); ++j)
                if (std::abs(eigenvalues_[i] - eigenvalues_[j]) <= tol::degeneracy_gap)
                    throw ValidationError("observable eigenvalues must be pairwise distinct");
    }

    const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }
    const Decomposition& decomposition() const noexcept { return decomposition_; }
    int dim() const noexcept { return decomposition_.dim(); }
    std::size_t size() const noexcept { return eigenvalues_.size(); }

    /// Reassembled Hermitian matrix: the eigenvalue-weighted projector sum.
    ComplexMatrix matrix() const {
        ComplexMatrix m = ComplexMatrix::zero(dim());
        for (std::size_t i = 0; i < size(); ++i)
            m += Complex{eigenvalues_[i], 0.0} * decomposition_[i].matrix();
        return m;
    }

private:
    std::vector<double> eigenvalues_;
    Decomposition decomposition_;
};

/// Mixed state: Hermitian, positive semidefinite, unit trace.
class DensityOperator {
public:
    explicit DensityOperator(ComplexMatrix matrix) : matrix_(std::move(matrix)) {
        if (!matrix_.is_hermitian(tol::hermitian))
            throw ValidationError("density operator must be Hermitian");
        const double tr = matrix_.trace().real();
        if (std::abs(tr - 1.0) > tol::reconstruction)
            throw ValidationError("density operator trace must be 1, got " + std::to_string(tr));
        const Eigendecomposition e = hermitian_eigendecomposition(matrix_);
        if (e.eigenvalues.front() < -tol::reconstruction)
            throw ValidationError("density operator has negative eigenvalue " +
                                  std::to_string(e.eigenvalues.front()));
    }

    static DensityOperator pure(const StateVector& psi) {
        return DensityOperator(Projector::onto(psi).matrix());
    }

    const ComplexMatrix& matrix() const noexcept { return matrix_; }
    int dim() const noexcept { return matrix_.dim(); }

private:
    ComplexMatrix matrix_;
};

/// The common refinement {R_j} of two compatible decompositions: every
/// nonzero product P_a Q_b, with back-pointers to the parents and the parent
/// eigenvalues carried along (now possibly repeating).
struct Refinement {
    Decomposition decomposition;
    std::vector<std::size_t> parent_a_index;
    std::vector<std::size_t> parent_b_index;
    std::vector<double> values_a;
    std::vector<double> values_b;

    std::size_t size() const noexcept { return decomposition.size(); }
};

/// Spectral representation with degenerate eigenvalues grouped into one
/// projector per cluster. Eigenvalues closer than the noise floor are one
/// cluster; gaps inside (noise, degeneracy_gap] are refused as ambiguous.
inline Observable spectral_decompose(const ComplexMatrix& h) {
    const Eigendecomposition e = hermitian_eigendecomposition(h);
    const int n = h.dim();
    std::vector<double> values;
    std::vector<Projector> projectors;
    std::size_t start = 0;
    for (std::size_t k = 1; k <= e.eigenvalues.size(); ++k) {
        if (k < e.eigenvalues.size()) {
            const double gap = e.eigenvalues[k] - e.eigenvalues[k - 1];
            if (gap <= tol::spectrum_noise) continue;
            if (gap <= tol::degeneracy_gap)
                throw AmbiguousSpectrumError(
                    "eigenvalue gap " + std::to_string(gap) +
                        " falls between the noise floor and the degeneracy threshold",
                    gap);
        }
        ComplexMatrix sum = ComplexMatrix::zero(n);
        double mean = 0.0;
        for (std::size_t i = start; i < k; ++i) {
            sum += outer_product(e.eigenvectors[i], e.eigenvectors[i]);
            mean += e.eigenvalues[i];
        }
        mean /= static_cast<double>(k - start);
        values.push_back(mean);
        projectors.emplace_back(std::move(sum));
        start = k;
    }
    return Observable(std::move(values), Decomposition(std::move(projectors)));
}

/// Membership test: a nonzero state has the property P iff P leaves it
/// fixed; a density operator has it iff P rho = rho.
inline bool has_property(const StateVector& psi, const Projector& p) {
    if (psi.dim() != p.dim()) throw ValidationError("state and projector dimensions differ");
    const double n = psi.norm();
    if (n == 0.0)
        throw ValidationError("the zero vector represents a property that is never true");
    std::vector<Complex> diff(static_cast<std::size_t>(psi.dim()));
    const StateVector projected = p.matrix() * psi;
    double s = 0.0;
    for (int i = 0; i < psi.dim(); ++i) s += std::norm(projected[i] - psi[i]);
    return std::sqrt(s) <= tol::reconstruction * n;
}

inline bool has_property(const DensityOperator& rho, const Projector& p) {
    if (rho.dim() != p.dim()) throw ValidationError("density operator and projector dimensions differ");
    return frobenius_distance(p.matrix() * rho.matrix(), rho.matrix()) <= tol::reconstruction;
}

inline bool are_compatible(const Projector& a, const Projector& b) {
    if (a.dim() != b.dim()) throw ValidationError("projector dimensions differ");
    return commutator_norm(a.matrix(), b.matrix()) <= tol::commuting;
}

inline bool are_compatible(const Observable& a, const Projector& b) {
    if (a.dim() != b.dim()) throw ValidationError("operand dimensions differ");
    return commutator_norm(a.matrix(), b.matrix()) <= tol::commuting;
}

inline bool are_compatible(const Projector& a, const Observable& b) { return are_compatible(b, a); }

/// Observables commute iff every pair of their spectral projectors does; both
/// routes are computed and must agree, otherwise the verdict would depend on
/// which textbook identity one happens to trust.
inline bool are_compatible(const Observable& a, const Observable& b) {
    if (a.dim() != b.dim()) throw ValidationError("observable dimensions differ");
    const bool by_matrix = commutator_norm(a.matrix(), b.matrix()) <= tol::commuting;
    bool by_projectors = true;
    for (const Projector& p : a.decomposition().projectors()) {
        for (const Projector& q : b.decomposition().projectors()) {
            if (commutator_norm(p.matrix(), q.matrix()) > tol::commuting) {
                by_projectors = false;
                break;
            }
        }
        if (!by_projectors) break;
    }
    if (by_matrix != by_projectors)
        throw NumericError("commutator checks disagree between operators and their projectors");
    return by_matrix;
}

/// First noncommuting projector pair between two decompositions, if any.
inline std::optional<std::pair<std::size_t, std::size_t>> first_noncommuting_pair(
    const Decomposition& a, const Decomposition& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            if (commutator_norm(a[i].matrix(), b[j].matrix()) > tol::commuting)
                return std::make_pair(i, j);
    return std::nullopt;
}

/// All nonzero products P_a Q_b in lexicographic (a, b) order. The result is
/// the smallest decomposition through which both inputs can be rewritten.
inline Refinement common_refinement(const Observable& a, const Observable& b) {
    if (a.dim() != b.dim()) throw ValidationError("observable dimensions differ");
    if (const auto pair = first_noncommuting_pair(a.decomposition(), b.decomposition()))
        throw IncompatibilityError("observables are incompatible: projectors " +
                                   std::to_string(pair->first) + " and " + std::to_string(pair->second) +
                                   " do not commute");
    std::vector<Projector> cells;
    std::vector<std::string> labels;
    std::vector<std::size_t> parent_a, parent_b;
    std::vector<double> values_a, values_b;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            ComplexMatrix prod = a.decomposition()[i].matrix() * b.decomposition()[j].matrix();
            if (std::llround(prod.trace().real()) < 1) continue;  // zero cell
            cells.emplace_back(std::move(prod));
            labels.push_back("r" + std::to_string(cells.size() - 1));
            parent_a.push_back(i);
            parent_b.push_back(j);
            values_a.push_back(a.eigenvalues()[i]);
            values_b.push_back(b.eigenvalues()[j]);
        }
    }
    return Refinement{Decomposition(std::move(cells), std::move(labels)), std::move(parent_a),
                      std::move(parent_b), std::move(values_a), std::move(values_b)};
}

/// The (a_j, b_j) value pairs over the common refinement, and the induced map
/// a_j -> b_j when it is single-valued.
struct FunctionalRelation {
    std::vector<std::pair<double, double>> pairs;
    std::optional<std::map<double, double>> function;  // empty when not single-valued

    bool is_function() const noexcept { return function.has_value(); }
};

inline FunctionalRelation functional_relation(const Observable& a, const Observable& b) {
    const Refinement r = common_refinement(a, b);
    FunctionalRelation out;
    std::map<double, double> fn;
    bool single_valued = true;
    for (std::size_t j = 0; j < r.size(); ++j) {
        out.pairs.emplace_back(r.values_a[j], r.values_b[j]);
        // a_j values are copied from the parent observable, so exact
        // comparison is the right notion of "same a".
        const auto it = fn.find(r.values_a[j]);
        if (it == fn.end())
            fn.emplace(r.values_a[j], r.values_b[j]);
        else if (it->second != r.values_b[j])
            single_valued = false;
    }
    if (single_valued) out.function = std::move(fn);
    return out;
}

}  // namespace chsim
