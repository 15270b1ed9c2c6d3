#include "dorl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dorl {

Matrix gram(const Matrix& x) {
    const int n = x.rows(), c = x.cols();
    Matrix g(c, c);
    for (int i = 0; i < n; ++i) {
        auto r = x.row(i);
        for (int j = 0; j < c; ++j) {
            if (r[j] == 0.0) continue;
            for (int k = j; k < c; ++k) g(j, k) += r[j] * r[k];
        }
    }
    for (int j = 0; j < c; ++j)
        for (int k = 0; k < j; ++k) g(j, k) = g(k, j);
    return g;
}

Vec matt_vec(const Matrix& x, const Vec& y) {
    if (static_cast<int>(y.size()) != x.rows())
        throw DimensionMismatch("vector length " + std::to_string(y.size()) +
                                " does not match row count " + std::to_string(x.rows()));
    Vec out(x.cols(), 0.0);
    for (int i = 0; i < x.rows(); ++i) {
        auto r = x.row(i);
        const double yi = y[i];
        if (yi == 0.0) continue;
        for (int j = 0; j < x.cols(); ++j) out[j] += r[j] * yi;
    }
    return out;
}

Vec mat_vec(const Matrix& x, const Vec& v) {
    if (static_cast<int>(v.size()) != x.cols())
        throw DimensionMismatch("vector length " + std::to_string(v.size()) +
                                " does not match column count " + std::to_string(x.cols()));
    Vec out(x.rows(), 0.0);
    for (int i = 0; i < x.rows(); ++i) out[i] = dot(x.row(i), v);
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

namespace {

void check_symmetric(const Matrix& m) {
    if (m.rows() != m.cols()) throw NotSymmetric("matrix is not square");
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-10)
                throw NotSymmetric("entry (" + std::to_string(i) + "," + std::to_string(j) +
                                   ") differs from its transpose by more than 1e-10");
}

double off_diagonal_sq(const Matrix& a) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i + 1; j < a.cols(); ++j) s += a(i, j) * a(i, j);
    return s;
}

}  // namespace

SymEigen sym_eigen(const Matrix& m) {
    check_symmetric(m);
    const int n = m.rows();
    Matrix a = m;
    // Symmetrize exactly so the rotations preserve symmetry bit-for-bit.
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = a(j, i) = v;
        }
    Matrix v = Matrix::identity(n);

    double scale = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
    const double tol = (scale > 0.0 ? scale : 1.0) * 1e-15;

    for (int sweep = 0; sweep < 60 && off_diagonal_sq(a) > tol * tol * n * n; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= tol) continue;
                const double app = a(p, p), aqq = a(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    SymEigen out;
    out.values.resize(n);
    for (int i = 0; i < n; ++i) out.values[i] = a(i, i);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return out.values[i] < out.values[j]; });
    Vec sorted(n);
    Matrix vs(n, n);
    for (int k = 0; k < n; ++k) {
        sorted[k] = out.values[order[k]];
        for (int i = 0; i < n; ++i) vs(i, k) = v(i, order[k]);
    }
    out.values = std::move(sorted);
    out.vectors = std::move(vs);
    return out;
}

double smallest_eigenvalue(const Matrix& m) { return sym_eigen(m).values.front(); }

Vec smallest_eigenvector(const Matrix& m) {
    SymEigen e = sym_eigen(m);
    const int n = m.rows();
    double spectral = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
    const double tie_tol = 1e-9 * std::max(1.0, spectral);

    Vec best;
    for (int k = 0; k < n && e.values[k] <= e.values.front() + tie_tol; ++k) {
        Vec cand(n);
        for (int i = 0; i < n; ++i) cand[i] = e.vectors(i, k);
        double nrm = norm2(cand);
        for (auto& c : cand) c /= nrm;
        for (int i = 0; i < n; ++i) {
            if (std::abs(cand[i]) > 1e-12) {
                if (cand[i] < 0.0)
                    for (auto& c : cand) c = -c;
                break;
            }
        }
        if (best.empty() || std::lexicographical_compare(cand.begin(), cand.end(), best.begin(), best.end()))
            best = std::move(cand);
    }
    return best;
}

FeatureMatrix FeatureMatrix::from(Matrix x) {
    if (x.rows() < 1 || x.cols() < 1) throw BadDims("feature matrix must be nonempty");
    double min_eig = sym_eigen(gram(x)).values.front();
    return FeatureMatrix(std::move(x), min_eig);
}

FeatureMatrix FeatureMatrix::checked(Matrix x) {
    for (int i = 0; i < x.rows(); ++i) {
        double sq = dot(x.row(i), x.row(i));
        if (sq > 1.0 + 1e-9)
            throw BadParams("row " + std::to_string(i) + " has squared norm " + std::to_string(sq) +
                            " > 1; feature rows must be normalised");
    }
    return from(std::move(x));
}

Vec least_squares(const FeatureMatrix& x, const Vec& y) {
    if (static_cast<int>(y.size()) != x.rows())
        throw DimensionMismatch("observation length " + std::to_string(y.size()) +
                                " does not match sample count " + std::to_string(x.rows()));
    if (!x.full_rank())
        throw RankDeficient("Gram matrix smallest eigenvalue " +
                            std::to_string(x.min_eigenvalue_gram()) + " is at or below tolerance " +
                            std::to_string(x.rank_tolerance()));

    SymEigen e = sym_eigen(gram(x.matrix()));
    Vec b = matt_vec(x.matrix(), y);
    const int c = x.cols();
    // theta = Q diag(1/lambda) Qᵀ b
    Vec qtb(c, 0.0);
    for (int k = 0; k < c; ++k) {
        double s = 0.0;
        for (int i = 0; i < c; ++i) s += e.vectors(i, k) * b[i];
        qtb[k] = s / e.values[k];
    }
    Vec theta(c, 0.0);
    for (int i = 0; i < c; ++i) {
        double s = 0.0;
        for (int k = 0; k < c; ++k) s += e.vectors(i, k) * qtb[k];
        theta[i] = s;
    }
    return theta;
}

double weighted_gram_min_eigenvalue(const FeatureMatrix& features, const Vec& weights) {
    if (static_cast<int>(weights.size()) != features.rows())
        throw DimensionMismatch("weight count " + std::to_string(weights.size()) +
                                " does not match feature rows " + std::to_string(features.rows()));
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw NotADistribution("negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw NotADistribution("weights sum to " + std::to_string(sum));

    const int c = features.cols();
    Matrix w(c, c);
    for (int i = 0; i < features.rows(); ++i) {
        auto r = features.row(i);
        const double wi = weights[i];
        if (wi == 0.0) continue;
        for (int j = 0; j < c; ++j)
            for (int k = j; k < c; ++k) w(j, k) += wi * r[j] * r[k];
    }
    for (int j = 0; j < c; ++j)
        for (int k = 0; k < j; ++k) w(j, k) = w(k, j);
    return sym_eigen(w).values.front();
}

}  // namespace dorl
