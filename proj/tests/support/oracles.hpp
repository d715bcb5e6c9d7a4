#pragma once

// Reference arithmetic for cross-checking library results. Everything here
// recomputes from first principles (index formulas, elementwise loops) so a
// defect in the library's operator plumbing cannot hide in both routes.

#include <complex>
#include <vector>

#include "chsim/matrix.hpp"

namespace oracle {

using chsim::Complex;
using chsim::ComplexMatrix;

inline ComplexMatrix mult(const ComplexMatrix& a, const ComplexMatrix& b) {
    const int n = a.dim();
    ComplexMatrix r(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Complex s = 0.0;
            for (int k = 0; k < n; ++k) s += a(i, k) * b(k, j);
            r(i, j) = s;
        }
    return r;
}

inline ComplexMatrix adjoint(const ComplexMatrix& a) {
    ComplexMatrix r(a.dim());
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < a.dim(); ++j) r(i, j) = std::conj(a(j, i));
    return r;
}

inline Complex trace(const ComplexMatrix& a) {
    Complex t = 0.0;
    for (int i = 0; i < a.dim(); ++i) t += a(i, i);
    return t;
}

/// Kronecker product straight from the index formula
/// r(ia*db+ib, ja*db+jb) = a(ia,ja) * b(ib,jb).
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    const int da = a.dim();
    const int db = b.dim();
    ComplexMatrix r(da * db);
    for (int i = 0; i < da * db; ++i)
        for (int j = 0; j < da * db; ++j)
            r(i, j) = a(i / db, j / db) * b(i % db, j % db);
    return r;
}

inline double max_entry_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
    double m = 0.0;
    for (int i = 0; i < a.dim(); ++i)
        for (int j = 0; j < a.dim(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
    return m;
}

}  // namespace oracle
