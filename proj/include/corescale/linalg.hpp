#ifndef CORESCALE_LINALG_HPP
#define CORESCALE_LINALG_HPP

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace corescale {

using Vec = std::vector<double>;

// Dense row-major matrix, sized for the small systems that appear here
// (chain dimension K+L-2 and the N x N critical-time blocks).
class Mat {
public:
    Mat() : rows_(0), cols_(0) {}
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows_(r), cols_(c), a_(r * c, fill) {}

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    Mat transpose() const {
        Mat t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Mat& operator+=(const Mat& o) {
        assert(rows_ == o.rows_ && cols_ == o.cols_);
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }

    Mat& operator*=(double c) {
        for (double& x : a_) x *= c;
        return *this;
    }

    friend Mat operator+(Mat a, const Mat& b) { return a += b; }

    friend Mat operator-(const Mat& a, const Mat& b) {
        assert(a.rows_ == b.rows_ && a.cols_ == b.cols_);
        Mat r(a.rows_, a.cols_);
        for (std::size_t i = 0; i < a.a_.size(); ++i) r.a_[i] = a.a_[i] - b.a_[i];
        return r;
    }

    friend Mat operator*(double c, Mat a) { return a *= c; }

    friend Mat operator*(const Mat& a, const Mat& b) {
        assert(a.cols_ == b.rows_);
        Mat r(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) r(i, j) += aik * b(k, j);
            }
        return r;
    }

    friend Vec operator*(const Mat& a, const Vec& x) {
        assert(a.cols_ == x.size());
        Vec y(a.rows_, 0.0);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t j = 0; j < a.cols_; ++j) y[i] += a(i, j) * x[j];
        return y;
    }

    double frobenius() const {
        double s = 0.0;
        for (double x : a_) s += x * x;
        return std::sqrt(s);
    }

    double max_abs() const {
        double s = 0.0;
        for (double x : a_) s = std::max(s, std::fabs(x));
        return s;
    }

private:
    std::size_t rows_, cols_;
    std::vector<double> a_;
};

inline double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec operator+(Vec a, const Vec& b) {
    assert(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vec operator-(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec operator*(double c, Vec a) {
    for (double& x : a) x *= c;
    return a;
}

// Gauss-Jordan with partial pivoting; throws on numerical singularity.
inline Mat inverse(Mat m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("inverse: not square");
    const std::size_t n = m.rows();
    Mat inv = Mat::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(m(r, col)) > std::fabs(m(piv, col))) piv = r;
        if (std::fabs(m(piv, col)) < 1e-300) throw std::runtime_error("inverse: singular matrix");
        if (piv != col)
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(m(piv, j), m(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        const double d = 1.0 / m(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            m(col, j) *= d;
            inv(col, j) *= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = m(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                m(r, j) -= f * m(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

inline double det(Mat m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("det: not square");
    const std::size_t n = m.rows();
    double d = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(m(r, col)) > std::fabs(m(piv, col))) piv = r;
        if (m(piv, col) == 0.0) return 0.0;
        if (piv != col) {
            d = -d;
            for (std::size_t j = 0; j < n; ++j) std::swap(m(piv, j), m(col, j));
        }
        d *= m(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = m(r, col) / m(col, col);
            for (std::size_t j = col; j < n; ++j) m(r, j) -= f * m(col, j);
        }
    }
    return d;
}

struct EigenSym {
    Vec values;    // ascending
    Mat vectors;   // columns are the eigenvectors
};

// Cyclic Jacobi rotations for a symmetric matrix.
inline EigenSym eigen_sym(Mat a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("eigen_sym: not square");
    const std::size_t n = a.rows();
    Mat v = Mat::identity(n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (std::sqrt(off) < 1e-15 * (1.0 + a.max_abs())) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    EigenSym e;
    e.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) e.values[i] = a(i, i);
    // sort ascending, permuting the eigenvector columns alongside
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (e.values[order[j]] < e.values[order[i]]) std::swap(order[i], order[j]);
    EigenSym out;
    out.values.resize(n);
    out.vectors = Mat(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = e.values[order[k]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

inline double min_eigenvalue_sym(const Mat& a) { return eigen_sym(a).values.front(); }

}  // namespace corescale

#endif
