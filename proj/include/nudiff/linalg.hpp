#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nudiff {

using Vec = std::vector<double>;

// Row-major dense matrix. Everything in this project is small (feature
// widths of a few hundred at most), so plain loops are enough.
struct Mat {
    size_t rows = 0;
    size_t cols = 0;
    Vec data;

    Mat() = default;
    Mat(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(size_t i, size_t j) { return data[i * cols + j]; }
    double operator()(size_t i, size_t j) const { return data[i * cols + j]; }

    double* row(size_t i) { return data.data() + i * cols; }
    const double* row(size_t i) const { return data.data() + i * cols; }

    size_t size() const { return data.size(); }
};

// y = M x
inline Vec matvec(const Mat& m, const Vec& x) {
    assert(x.size() == m.cols);
    Vec y(m.rows, 0.0);
    for (size_t i = 0; i < m.rows; i++) {
        const double* r = m.row(i);
        double acc = 0.0;
        for (size_t j = 0; j < m.cols; j++)
            acc += r[j] * x[j];
        y[i] = acc;
    }
    return y;
}

// y = M^T x
inline Vec matvec_t(const Mat& m, const Vec& x) {
    assert(x.size() == m.rows);
    Vec y(m.cols, 0.0);
    for (size_t i = 0; i < m.rows; i++) {
        const double xi = x[i];
        const double* r = m.row(i);
        for (size_t j = 0; j < m.cols; j++)
            y[j] += r[j] * xi;
    }
    return y;
}

// C = A B
inline Mat matmul(const Mat& a, const Mat& b) {
    assert(a.cols == b.rows);
    Mat c(a.rows, b.cols, 0.0);
    for (size_t i = 0; i < a.rows; i++) {
        for (size_t k = 0; k < a.cols; k++) {
            const double aik = a(i, k);
            const double* br = b.row(k);
            double* cr = c.row(i);
            for (size_t j = 0; j < b.cols; j++)
                cr[j] += aik * br[j];
        }
    }
    return c;
}

// C = A B^T
inline Mat matmul_bt(const Mat& a, const Mat& b) {
    assert(a.cols == b.cols);
    Mat c(a.rows, b.rows, 0.0);
    for (size_t i = 0; i < a.rows; i++) {
        for (size_t j = 0; j < b.rows; j++) {
            const double* ar = a.row(i);
            const double* br = b.row(j);
            double acc = 0.0;
            for (size_t k = 0; k < a.cols; k++)
                acc += ar[k] * br[k];
            c(i, j) = acc;
        }
    }
    return c;
}

// C = A^T B
inline Mat matmul_at(const Mat& a, const Mat& b) {
    assert(a.rows == b.rows);
    Mat c(a.cols, b.cols, 0.0);
    for (size_t i = 0; i < a.rows; i++) {
        const double* ar = a.row(i);
        const double* br = b.row(i);
        for (size_t k = 0; k < a.cols; k++) {
            const double aki = ar[k];
            double* cr = c.row(k);
            for (size_t j = 0; j < b.cols; j++)
                cr[j] += aki * br[j];
        }
    }
    return c;
}

inline void axpy(double a, const Vec& x, Vec& y) {
    assert(x.size() == y.size());
    for (size_t i = 0; i < x.size(); i++)
        y[i] += a * x[i];
}

inline double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); i++)
        acc += a[i] * b[i];
    return acc;
}

inline double sq_norm(const Vec& v) { return dot(v, v); }

// Cyclic Jacobi eigensolver for symmetric matrices. Returns eigenvalues and
// fills `vectors` with eigenvectors as columns. Dimensions here are tiny
// (covariance matrices of toy data), so convergence is immediate.
inline Vec symmetric_eigen(const Mat& m, Mat& vectors) {
    if (m.rows != m.cols)
        throw std::invalid_argument("symmetric_eigen: matrix not square");
    const size_t n = m.rows;
    Mat a = m;
    vectors = Mat(n, n, 0.0);
    for (size_t i = 0; i < n; i++)
        vectors(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; sweep++) {
        double off = 0.0;
        for (size_t p = 0; p < n; p++)
            for (size_t q = p + 1; q < n; q++)
                off += a(p, q) * a(p, q);
        if (off < 1e-30)
            break;
        for (size_t p = 0; p < n; p++) {
            for (size_t q = p + 1; q < n; q++) {
                if (std::abs(a(p, q)) < 1e-300)
                    continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t k = 0; k < n; k++) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; k++) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (size_t k = 0; k < n; k++) {
                    const double vkp = vectors(k, p), vkq = vectors(k, q);
                    vectors(k, p) = c * vkp - s * vkq;
                    vectors(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    Vec eig(n);
    for (size_t i = 0; i < n; i++)
        eig[i] = a(i, i);
    return eig;
}

// Symmetric PSD square root via eigendecomposition. Slightly negative
// eigenvalues from roundoff are clamped to zero.
inline Mat sqrtm_psd(const Mat& m) {
    Mat v;
    Vec eig = symmetric_eigen(m, v);
    const size_t n = m.rows;
    for (auto& e : eig) {
        if (e < -1e-9)
            throw std::invalid_argument("sqrtm_psd: matrix not PSD");
        e = std::sqrt(e < 0.0 ? 0.0 : e);
    }
    Mat out(n, n, 0.0);
    for (size_t i = 0; i < n; i++)
        for (size_t j = 0; j < n; j++) {
            double acc = 0.0;
            for (size_t k = 0; k < n; k++)
                acc += v(i, k) * eig[k] * v(j, k);
            out(i, j) = acc;
        }
    return out;
}

// Cholesky factor L (lower) of an SPD matrix; throws if not positive definite.
inline Mat cholesky(const Mat& m) {
    if (m.rows != m.cols)
        throw std::invalid_argument("cholesky: matrix not square");
    const size_t n = m.rows;
    Mat l(n, n, 0.0);
    for (size_t i = 0; i < n; i++) {
        for (size_t j = 0; j <= i; j++) {
            double acc = m(i, j);
            for (size_t k = 0; k < j; k++)
                acc -= l(i, k) * l(j, k);
            if (i == j) {
                if (acc <= 0.0)
                    throw std::invalid_argument("cholesky: matrix not positive definite");
                l(i, j) = std::sqrt(acc);
            } else {
                l(i, j) = acc / l(j, j);
            }
        }
    }
    return l;
}

// Solves M x = b given the Cholesky factor of M.
inline Vec cholesky_solve(const Mat& l, const Vec& b) {
    const size_t n = l.rows;
    Vec y(n);
    for (size_t i = 0; i < n; i++) {
        double acc = b[i];
        for (size_t k = 0; k < i; k++)
            acc -= l(i, k) * y[k];
        y[i] = acc / l(i, i);
    }
    Vec x(n);
    for (size_t ii = n; ii-- > 0;) {
        double acc = y[ii];
        for (size_t k = ii + 1; k < n; k++)
            acc -= l(k, ii) * x[k];
        x[ii] = acc / l(ii, ii);
    }
    return x;
}

}  // namespace nudiff
