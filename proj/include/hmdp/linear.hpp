#pragma once

#include "hmdp/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace hmdp::linalg {

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    void swap_rows(std::size_t a, std::size_t b) {
        if (a == b) return;
        for (std::size_t c = 0; c < cols_; ++c) std::swap((*this)(a, c), (*this)(b, c));
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Solution block plus the number of row operations spent computing it.
struct LinearSolution {
    Matrix x;
    std::size_t row_operations = 0;
};

/**
 * Solves A X = B by Gaussian elimination with partial pivoting.
 *
 * Work is counted in row operations: one per eliminated (pivot, row) pair
 * and one per back-substituted row and right-hand side.
 */
inline LinearSolution solve_dense(Matrix a, Matrix b, double singular_tolerance = 1e-12) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.rows() != n) throw SolverError("dimension mismatch in dense solve");
    const std::size_t m = b.cols();
    std::size_t ops = 0;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > best) {
                best = std::abs(a(i, k));
                pivot = i;
            }
        }
        if (!(best > singular_tolerance)) throw SolverError("singular system in dense solve (pivot " + std::to_string(k) + ")");
        a.swap_rows(k, pivot);
        b.swap_rows(k, pivot);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double factor = a(i, k) / a(k, k);
            if (factor == 0.0) continue;
            a(i, k) = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= factor * a(k, j);
            for (std::size_t j = 0; j < m; ++j) b(i, j) -= factor * b(k, j);
            ++ops;
        }
    }

    Matrix x(n, m);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t ii = n; ii-- > 0;) {
            double sum = b(ii, j);
            for (std::size_t c = ii + 1; c < n; ++c) sum -= a(ii, c) * x(c, j);
            x(ii, j) = sum / a(ii, ii);
            ++ops;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (!std::isfinite(x(i, j))) throw SolverError("non-finite solution in dense solve");
    return {std::move(x), ops};
}

/// Sparse square operator given as (column, coefficient) lists per row.
using SparseRows = std::vector<std::vector<std::pair<std::size_t, double>>>;

/**
 * Solves X = B + P X by repeated synchronous sweeps, where P is a sparse
 * nonnegative contraction (row sums < 1). Stops when the max-norm change
 * of a sweep falls below `tolerance`. Each row update of one right-hand
 * side counts as one row operation.
 */
inline LinearSolution solve_fixed_point(const SparseRows& p, const Matrix& b, double tolerance,
                                        std::size_t max_sweeps = 1'000'000) {
    const std::size_t n = p.size();
    if (b.rows() != n) throw SolverError("dimension mismatch in fixed-point solve");
    if (!(tolerance > 0.0)) throw SolverError("fixed-point tolerance must be positive");
    const std::size_t m = b.cols();
    Matrix x = b;
    Matrix next(n, m);
    std::size_t ops = 0;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                double sum = b(i, j);
                for (const auto& [c, coef] : p[i]) sum += coef * x(c, j);
                change = std::max(change, std::abs(sum - x(i, j)));
                next(i, j) = sum;
                ++ops;
            }
        }
        std::swap(x, next);
        if (!std::isfinite(change)) throw SolverError("fixed-point iteration diverged");
        if (change < tolerance) return {std::move(x), ops};
    }
    throw SolverError("fixed-point iteration did not converge");
}

} // namespace hmdp::linalg
