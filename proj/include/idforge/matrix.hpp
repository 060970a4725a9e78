#ifndef IDFORGE_MATRIX_HPP
#define IDFORGE_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "idforge/errors.hpp"

namespace idforge {

/// Dense row-major matrix of 64-bit reals. Constructors reject non-finite
/// entries so downstream code can assume finiteness.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), v_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), v_(std::move(values)) {
        if (v_.size() != rows_ * cols_)
            throw DimensionError("matrix: values length " + std::to_string(v_.size()) +
                                 " != rows*cols " + std::to_string(rows_ * cols_));
        for (double x : v_)
            if (!std::isfinite(x))
                throw NumericalError("matrix: non-finite entry rejected");
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    std::vector<double> row(std::size_t r) const {
        return std::vector<double>(v_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
                                   v_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_));
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            t(c, r) = a(r, c);
    return t;
}

inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("mat_mul: inner dimensions " + std::to_string(a.cols()) +
                             " vs " + std::to_string(b.rows()));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j)
                out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

/// Column-wise arithmetic mean of the rows.
inline std::vector<double> mean_row(const Matrix& a) {
    if (a.rows() == 0)
        throw DimensionError("mean_row: zero rows");
    std::vector<double> mu(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            mu[c] += a(r, c);
    for (double& x : mu) x /= static_cast<double>(a.rows());
    return mu;
}

struct SvdFactors {
    Matrix u;                            // m x q, orthonormal columns
    std::vector<double> singular_values; // length q = min(m,d), nonincreasing
    Matrix v;                            // d x q, orthonormal columns
};

namespace detail {

// Deterministic orthonormal completion for columns whose singular value is
// (numerically) zero: Gram-Schmidt of standard basis vectors against the
// columns already present.
inline void complete_column(Matrix& u, std::size_t col) {
    const std::size_t n = u.rows();
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> cand(n, 0.0);
        cand[k] = 1.0;
        for (std::size_t j = 0; j < u.cols(); ++j) {
            if (j == col) continue;
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += u(i, j) * cand[i];
            if (dot != 0.0)
                for (std::size_t i = 0; i < n; ++i) cand[i] -= dot * u(i, j);
        }
        double norm = 0.0;
        for (double x : cand) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > 0.5) {
            for (std::size_t i = 0; i < n; ++i) u(i, col) = cand[i] / norm;
            return;
        }
    }
    throw NumericalError("svd: failed to complete orthonormal basis");
}

} // namespace detail

/// Thin SVD by one-sided Jacobi rotations. Robust for the small matrices
/// this library works with (m <= a few hundred). Sign convention: the first
/// entry of each right-singular vector with magnitude above 1e-12 is
/// positive.
inline SvdFactors thin_svd(const Matrix& a) {
    if (a.empty())
        throw DimensionError("thin_svd: empty matrix");

    const bool transposed = a.rows() < a.cols();
    Matrix b = transposed ? transpose(a) : a; // n x c with n >= c
    const std::size_t n = b.rows();
    const std::size_t c = b.cols();
    Matrix rot = Matrix::identity(c);

    constexpr int kMaxSweeps = 1000;
    constexpr double kTol = 1e-12;

    double frob_sq = 0.0;
    for (double x : b.values()) frob_sq += x * x;
    const double negligible = frob_sq * 1e-28; // columns this small are rank-zero

    for (int sweep = 0; ; ++sweep) {
        if (sweep >= kMaxSweeps)
            throw NumericalError("thin_svd: Jacobi sweeps did not converge");
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < c; ++p) {
            for (std::size_t q = p + 1; q < c; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                if (app <= negligible || aqq <= negligible)
                    continue;
                if (std::abs(apq) <= kTol * std::sqrt(app * aqq) || apq == 0.0)
                    continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    b(i, p) = cs * bp - sn * bq;
                    b(i, q) = sn * bp + cs * bq;
                }
                for (std::size_t i = 0; i < c; ++i) {
                    const double rp = rot(i, p), rq = rot(i, q);
                    rot(i, p) = cs * rp - sn * rq;
                    rot(i, q) = sn * rp + cs * rq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sigma(c, 0.0);
    for (std::size_t j = 0; j < c; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += b(i, j) * b(i, j);
        sigma[j] = std::sqrt(s);
    }

    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    double smax = sigma.empty() ? 0.0 : sigma[order[0]];
    const double zero_cut = smax * 1e-14;

    Matrix left(n, c);  // normalized columns of b
    Matrix right(c, c); // accumulated rotations
    std::vector<double> sv(c);
    for (std::size_t j = 0; j < c; ++j) {
        const std::size_t src = order[j];
        sv[j] = sigma[src];
        for (std::size_t i = 0; i < c; ++i) right(i, j) = rot(i, src);
        if (sigma[src] > zero_cut && sigma[src] > 0.0) {
            for (std::size_t i = 0; i < n; ++i) left(i, j) = b(i, src) / sigma[src];
        }
    }
    for (std::size_t j = 0; j < c; ++j) {
        const std::size_t src = order[j];
        if (!(sigma[src] > zero_cut && sigma[src] > 0.0)) {
            sv[j] = 0.0;
            detail::complete_column(left, j);
        }
    }

    SvdFactors f;
    if (transposed) {
        f.u = std::move(right); // m x q
        f.v = std::move(left);  // d x q
    } else {
        f.u = std::move(left);
        f.v = std::move(right);
    }
    f.singular_values = std::move(sv);

    // Fix signs from v's columns, flipping u to match.
    for (std::size_t j = 0; j < f.v.cols(); ++j) {
        double lead = 0.0;
        for (std::size_t i = 0; i < f.v.rows(); ++i) {
            if (std::abs(f.v(i, j)) > 1e-12) { lead = f.v(i, j); break; }
        }
        if (lead < 0.0) {
            for (std::size_t i = 0; i < f.v.rows(); ++i) f.v(i, j) = -f.v(i, j);
            for (std::size_t i = 0; i < f.u.rows(); ++i) f.u(i, j) = -f.u(i, j);
        }
    }
    return f;
}

} // namespace idforge

#endif
