#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include "chsim/error.hpp"

namespace chsim {

using Complex = std::complex<double>;

/// Library-wide tolerances and capacity bounds. Double precision at desk-scale
/// dimensions (<= 64 per factor) leaves at least five orders of margin over
/// the acceptance thresholds below.
namespace tol {
inline constexpr double hermitian = 1e-10;        // ||H - H'||_F for Hermitian inputs
inline constexpr double projector = 1e-10;        // idempotence / self-adjointness of projectors
inline constexpr double reconstruction = 1e-9;    // spectral reconstruction error
inline constexpr double completeness = 1e-9;      // decomposition sums to identity
inline constexpr double orthogonality = 1e-9;     // pairwise products of decomposition members
inline constexpr double commuting = 1e-9;         // Frobenius norm of a commutator
inline constexpr double unitarity = 1e-9;         // ||U'U - I||_F
inline constexpr double calibration = 1e-9;       // pointer/property correlation defect
inline constexpr double consistency = 1e-9;       // decoherence off-diagonal magnitude
inline constexpr double probability = 1e-9;       // distributions sum to one
inline constexpr double spectrum_noise = 1e-9;    // eigenvalues closer than this are one cluster
inline constexpr double degeneracy_gap = 1e-8;    // eigenvalues farther than this are distinct
inline constexpr int max_total_dim = 4096;        // tensor-product capacity
inline constexpr int max_jacobi_sweeps = 100;
inline constexpr int max_history_count = 4096;
inline constexpr int max_valuation_ids = 64;
}  // namespace tol

/// Dense square matrix of complex amplitudes, row-major. The universal
/// carrier for operators, projectors and density operators. Immutable in
/// spirit: every operation returns a fresh value.
class ComplexMatrix {
public:
    explicit ComplexMatrix(int dim) : dim_(check_dim(dim)), entries_(static_cast<std::size_t>(dim) * dim) {}

    ComplexMatrix(int dim, std::vector<Complex> entries)
        : dim_(check_dim(dim)), entries_(std::move(entries)) {
        if (entries_.size() != static_cast<std::size_t>(dim_) * dim_)
            throw ValidationError("matrix entry count " + std::to_string(entries_.size()) +
                                  " does not match dim " + std::to_string(dim_));
        for (const Complex& z : entries_)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw ValidationError("matrix entries must be finite");
    }

    static ComplexMatrix identity(int dim) {
        ComplexMatrix m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    static ComplexMatrix zero(int dim) { return ComplexMatrix(dim); }

    static ComplexMatrix diagonal(const std::vector<double>& values) {
        ComplexMatrix m(static_cast<int>(values.size()));
        for (int i = 0; i < m.dim(); ++i) m(i, i) = values[static_cast<std::size_t>(i)];
        return m;
    }

    int dim() const noexcept { return dim_; }

    Complex& operator()(int i, int j) { return entries_[static_cast<std::size_t>(i) * dim_ + j]; }
    const Complex& operator()(int i, int j) const { return entries_[static_cast<std::size_t>(i) * dim_ + j]; }

    const std::vector<Complex>& entries() const noexcept { return entries_; }

    ComplexMatrix adjoint() const {
        ComplexMatrix r(dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) r(j, i) = std::conj((*this)(i, j));
        return r;
    }

    Complex trace() const {
        Complex t = 0.0;
        for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const Complex& z : entries_) s += std::norm(z);
        return std::sqrt(s);
    }

    bool is_hermitian(double tolerance) const {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) s += std::norm((*this)(i, j) - std::conj((*this)(j, i)));
        return std::sqrt(s) <= tolerance;
    }

    bool is_unitary(double tolerance) const;

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        require_same_dim(o, "+");
        for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] += o.entries_[k];
        return *this;
    }

    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        require_same_dim(o, "-");
        for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] -= o.entries_[k];
        return *this;
    }

    ComplexMatrix& operator*=(Complex scalar) {
        for (Complex& z : entries_) z *= scalar;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }
    friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
        a.require_same_dim(b, "*");
        const int n = a.dim_;
        ComplexMatrix r(n);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                const Complex aik = a(i, k);
                if (aik == Complex{0.0, 0.0}) continue;
                for (int j = 0; j < n; ++j) r(i, j) += aik * b(k, j);
            }
        return r;
    }

private:
    static int check_dim(int dim) {
        if (dim < 1) throw ValidationError("matrix dim must be >= 1, got " + std::to_string(dim));
        return dim;
    }

    void require_same_dim(const ComplexMatrix& o, const char* op) const {
        if (dim_ != o.dim_)
            throw ValidationError(std::string("dimension mismatch in '") + op + "': " +
                                  std::to_string(dim_) + " vs " + std::to_string(o.dim_));
    }

    int dim_;
    std::vector<Complex> entries_;
};

/// Column vector of complex amplitudes on a Hilbert space of dimension dim.
class StateVector {
public:
    explicit StateVector(std::vector<Complex> amplitudes) : amplitudes_(std::move(amplitudes)) {
        if (amplitudes_.empty()) throw ValidationError("state vector must have dim >= 1");
        for (const Complex& z : amplitudes_)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                throw ValidationError("state amplitudes must be finite");
    }

    static StateVector basis(int dim, int index) {
        std::vector<Complex> a(static_cast<std::size_t>(dim));
        a.at(static_cast<std::size_t>(index)) = 1.0;
        return StateVector(std::move(a));
    }

    int dim() const noexcept { return static_cast<int>(amplitudes_.size()); }

    Complex& operator[](int i) { return amplitudes_[static_cast<std::size_t>(i)]; }
    const Complex& operator[](int i) const { return amplitudes_[static_cast<std::size_t>(i)]; }

    const std::vector<Complex>& amplitudes() const noexcept { return amplitudes_; }

    double norm() const {
        double s = 0.0;
        for (const Complex& z : amplitudes_) s += std::norm(z);
        return std::sqrt(s);
    }

    StateVector normalized() const {
        const double n = norm();
        if (n == 0.0) throw DegenerateInputError("cannot normalize the zero vector");
        StateVector r = *this;
        for (Complex& z : r.amplitudes_) z /= n;
        return r;
    }

    /// <this|other>, conjugate-linear in the left argument.
    Complex inner(const StateVector& other) const {
        if (dim() != other.dim())
            throw ValidationError("dimension mismatch in inner product");
        Complex s = 0.0;
        for (int i = 0; i < dim(); ++i) s += std::conj((*this)[i]) * other[i];
        return s;
    }

private:
    std::vector<Complex> amplitudes_;
};

inline StateVector operator*(const ComplexMatrix& m, const StateVector& v) {
    if (m.dim() != v.dim()) throw ValidationError("dimension mismatch in matrix-vector product");
    std::vector<Complex> r(static_cast<std::size_t>(m.dim()));
    for (int i = 0; i < m.dim(); ++i) {
        Complex s = 0.0;
        for (int j = 0; j < m.dim(); ++j) s += m(i, j) * v[j];
        r[static_cast<std::size_t>(i)] = s;
    }
    return StateVector(std::move(r));
}

/// |a><b| as a matrix.
inline ComplexMatrix outer_product(const StateVector& a, const StateVector& b) {
    if (a.dim() != b.dim()) throw ValidationError("dimension mismatch in outer product");
    ComplexMatrix r(a.dim());
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < a.dim(); ++j) r(i, j) = a[i] * std::conj(b[j]);
    return r;
}

/// Kronecker product; row index of the result is i_a * dim_b + i_b.
inline ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b,
                                    int max_total_dim = tol::max_total_dim) {
    const long long total = static_cast<long long>(a.dim()) * b.dim();
    if (total > max_total_dim)
        throw CapacityError("tensor product dimension " + std::to_string(total) +
                            " exceeds maximum " + std::to_string(max_total_dim));
    const int da = a.dim(), db = b.dim(), d = static_cast<int>(total);
    ComplexMatrix r(d);
    for (int ia = 0; ia < da; ++ia)
        for (int ja = 0; ja < da; ++ja) {
            const Complex f = a(ia, ja);
            if (f == Complex{0.0, 0.0}) continue;
            for (int ib = 0; ib < db; ++ib)
                for (int jb = 0; jb < db; ++jb)
                    r(ia * db + ib, ja * db + jb) = f * b(ib, jb);
        }
    return r;
}

inline StateVector tensor_product(const StateVector& a, const StateVector& b) {
    std::vector<Complex> r(static_cast<std::size_t>(a.dim()) * b.dim());
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < b.dim(); ++j)
            r[static_cast<std::size_t>(i) * b.dim() + j] = a[i] * b[j];
    return StateVector(std::move(r));
}

inline double frobenius_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.dim() != b.dim())
        throw ValidationError("dimension mismatch in frobenius_distance: " +
                              std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < a.dim(); ++j) s += std::norm(a(i, j) - b(i, j));
    return std::sqrt(s);
}

inline double commutator_norm(const ComplexMatrix& a, const ComplexMatrix& b) {
    return frobenius_distance(a * b, b * a);
}

inline bool ComplexMatrix::is_unitary(double tolerance) const {
    return frobenius_distance(adjoint() * (*this), ComplexMatrix::identity(dim_)) <= tolerance;
}

/// Tr(a * b) without forming the product.
inline Complex product_trace(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.dim() != b.dim()) throw ValidationError("dimension mismatch in product_trace");
    Complex t = 0.0;
    for (int i = 0; i < a.dim(); ++i)
        for (int k = 0; k < a.dim(); ++k) t += a(i, k) * b(k, i);
    return t;
}

struct Eigendecomposition {
    std::vector<double> eigenvalues;        // ascending
    std::vector<StateVector> eigenvectors;  // orthonormal, aligned with eigenvalues
};

/// Cyclic Jacobi diagonalization for Hermitian complex matrices.
/// Deterministic and accurate at the desk-scale dimensions this library
/// targets; each rotation is exactly unitary, so the eigenvector set stays
/// orthonormal to rounding.
inline Eigendecomposition hermitian_eigendecomposition(const ComplexMatrix& h,
                                                       int max_sweeps = tol::max_jacobi_sweeps) {
    {
        const double defect = frobenius_distance(h, h.adjoint());
        if (defect > tol::hermitian)
            throw ValidationError("matrix is not Hermitian: ||H - H'||_F = " + std::to_string(defect));
    }
    const int n = h.dim();
    // Symmetrize away the tolerated defect so diagonal entries stay real.
    ComplexMatrix a = Complex{0.5, 0.0} * (h + h.adjoint());
    ComplexMatrix v = ComplexMatrix::identity(n);

    const double scale = std::max(1.0, a.frobenius_norm());
    const double target = 1e-14 * scale;

    auto off_norm = [&]() {
        double s = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) s += 2.0 * std::norm(a(p, q));
        return std::sqrt(s);
    };

    bool converged = off_norm() <= target;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const Complex apq = a(p, q);
                const double absb = std::abs(apq);
                if (absb == 0.0) continue;
                const Complex phase = apq / absb;  // e^{i arg}
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double theta = 0.5 * std::atan2(2.0 * absb, app - aqq);
                const double c = std::cos(theta);
                const double s = std::sin(theta);
                const Complex sp = s * phase;
                const Complex spc = s * std::conj(phase);
                // A <- A U   with U = [[c, -s e^{i phi}], [s e^{-i phi}, c]] on (p,q)
                for (int i = 0; i < n; ++i) {
                    const Complex aip = a(i, p);
                    const Complex aiq = a(i, q);
                    a(i, p) = aip * c + aiq * spc;
                    a(i, q) = aiq * c - aip * sp;
                }
                // A <- U' A
                for (int j = 0; j < n; ++j) {
                    const Complex apj = a(p, j);
                    const Complex aqj = a(q, j);
                    a(p, j) = apj * c + aqj * sp;
                    a(q, j) = aqj * c - apj * spc;
                }
                // V <- V U
                for (int i = 0; i < n; ++i) {
                    const Complex vip = v(i, p);
                    const Complex viq = v(i, q);
                    v(i, p) = vip * c + viq * spc;
                    v(i, q) = viq * c - vip * sp;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
            }
        }
        converged = off_norm() <= target;
    }
    if (!converged)
        throw NumericError("Jacobi eigensolver did not converge in " +
                           std::to_string(max_sweeps) + " sweeps");

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a(i, i).real() < a(j, j).real(); });

    Eigendecomposition out;
    out.eigenvalues.reserve(static_cast<std::size_t>(n));
    out.eigenvectors.reserve(static_cast<std::size_t>(n));
    for (int k : order) {
        out.eigenvalues.push_back(a(k, k).real());
        std::vector<Complex> col(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = v(i, k);
        out.eigenvectors.emplace_back(std::move(col));
    }
    return out;
}

}  // namespace chsim
