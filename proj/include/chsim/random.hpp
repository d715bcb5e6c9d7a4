#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "chsim/matrix.hpp"

namespace chsim {

/// Deterministic splitmix64 generator. The standard library distributions are
/// implementation-defined, so seeded corpora and seeded CLI scenarios use this
/// fully specified generator to stay reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) { return next_u64() % bound; }

    /// Standard normal via Box-Muller.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Complex gaussian_complex() { return {gaussian(), gaussian()}; }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline StateVector random_state(int dim, Rng& rng) {
    std::vector<Complex> a(static_cast<std::size_t>(dim));
    for (Complex& z : a) z = rng.gaussian_complex();
    return StateVector(std::move(a)).normalized();
}

inline ComplexMatrix random_matrix(int dim, Rng& rng) {
    ComplexMatrix m(dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = rng.gaussian_complex();
    return m;
}

inline ComplexMatrix random_hermitian(int dim, Rng& rng) {
    const ComplexMatrix g = random_matrix(dim, rng);
    return Complex{0.5, 0.0} * (g + g.adjoint());
}

/// Haar-like random unitary from modified Gram-Schmidt on Gaussian columns.
inline ComplexMatrix random_unitary(int dim, Rng& rng) {
    std::vector<std::vector<Complex>> cols;
    cols.reserve(static_cast<std::size_t>(dim));
    while (static_cast<int>(cols.size()) < dim) {
        std::vector<Complex> c(static_cast<std::size_t>(dim));
        for (Complex& z : c) z = rng.gaussian_complex();
        for (const auto& prev : cols) {
            Complex overlap = 0.0;
            for (int i = 0; i < dim; ++i) overlap += std::conj(prev[static_cast<std::size_t>(i)]) * c[static_cast<std::size_t>(i)];
            for (int i = 0; i < dim; ++i) c[static_cast<std::size_t>(i)] -= overlap * prev[static_cast<std::size_t>(i)];
        }
        double n2 = 0.0;
        for (const Complex& z : c) n2 += std::norm(z);
        if (n2 < 1e-12) continue;  // re-draw a (nearly) dependent column
        const double inv = 1.0 / std::sqrt(n2);
        for (Complex& z : c) z *= inv;
        cols.push_back(std::move(c));
    }
    ComplexMatrix u(dim);
    for (int j = 0; j < dim; ++j)
        for (int i = 0; i < dim; ++i) u(i, j) = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    return u;
}

/// Random partition of {0..dim-1} into `parts` nonempty contiguous-size cells
/// (sizes random, order fixed), returned as per-cell index lists.
inline std::vector<std::vector<int>> random_partition(int dim, int parts, Rng& rng) {
    std::vector<int> sizes(static_cast<std::size_t>(parts), 1);
    for (int extra = dim - parts; extra > 0; --extra)
        sizes[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(parts)))] += 1;
    std::vector<std::vector<int>> cells;
    int next = 0;
    for (int s : sizes) {
        std::vector<int> cell;
        for (int k = 0; k < s; ++k) cell.push_back(next++);
        cells.push_back(std::move(cell));
    }
    return cells;
}

}  // namespace chsim
