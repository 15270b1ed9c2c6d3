#pragma once

#include <span>
#include <string>
#include <vector>

#include "dorl/errors.hpp"

namespace dorl {

using Vec = std::vector<double>;

/// Dense row-major matrix. Sized for desk-scale problems (dimensions up to
/// a few hundred); no sparse or blocked paths.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    std::span<const double> row(int i) const {
        return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
    }

    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix& o) const = default;

private:
    int rows_, cols_;
    std::vector<double> data_;
};

/// Gram matrix XᵀX.
Matrix gram(const Matrix& x);

/// Xᵀy.
Vec matt_vec(const Matrix& x, const Vec& y);

/// X v for a cols-sized v.
Vec mat_vec(const Matrix& x, const Vec& v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

struct SymEigen {
    Vec values;      // ascending
    Matrix vectors;  // column k is the eigenvector for values[k]
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Throws NotSymmetric if |M - Mᵀ| exceeds 1e-10 entrywise.
SymEigen sym_eigen(const Matrix& m);

double smallest_eigenvalue(const Matrix& m);

/// Eigenvector for the smallest eigenvalue. Among eigenvalues tied within
/// 1e-9 (relative to the spectral scale) returns the lexicographically
/// first normalized candidate, sign-fixed so the first nonzero component
/// is positive.
Vec smallest_eigenvector(const Matrix& m);

/// Feature/context matrix with its Gram smallest eigenvalue cached.
/// Immutable after construction, so the cache never goes stale.
class FeatureMatrix {
public:
    /// Wraps a matrix without the normalization check. Used by the
    /// hard-instance constructions, whose scaled-basis rows can exceed
    /// unit norm when the per-sample eigenvalue times the sample count
    /// exceeds one.
    static FeatureMatrix from(Matrix x);

    /// Wraps a matrix and enforces row norms <= 1 + 1e-9.
    static FeatureMatrix checked(Matrix x);

    const Matrix& matrix() const { return x_; }
    int rows() const { return x_.rows(); }
    int cols() const { return x_.cols(); }
    std::span<const double> row(int i) const { return x_.row(i); }
    double min_eigenvalue_gram() const { return min_eig_gram_; }

    /// rank_tolerance = 1e-10 * rows; Gram matrices scale with the sample
    /// count, so the threshold does too.
    double rank_tolerance() const { return 1e-10 * static_cast<double>(x_.rows()); }
    bool full_rank() const { return min_eig_gram_ > rank_tolerance(); }

private:
    FeatureMatrix(Matrix x, double min_eig) : x_(std::move(x)), min_eig_gram_(min_eig) {}
    Matrix x_;
    double min_eig_gram_;
};

/// Least-squares solve of min ||X theta - y||^2 through the normal
/// equations, using the symmetric eigendecomposition of XᵀX.
/// Throws RankDeficient when the Gram matrix is numerically singular and
/// DimensionMismatch when y does not match the row count.
Vec least_squares(const FeatureMatrix& x, const Vec& y);

/// Smallest eigenvalue of sum_i w_i c_i c_iᵀ for a probability vector w
/// over the rows of `features`. Returns 0 for degenerate weightings.
double weighted_gram_min_eigenvalue(const FeatureMatrix& features, const Vec& weights);

}  // namespace dorl
