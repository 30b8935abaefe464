#ifndef KDL_LINALG_HPP
#define KDL_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdl {

using Vec = std::vector<double>;

struct InvalidInput : std::runtime_error {
    explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec operator+(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vec operator-(Vec a, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

inline Vec operator*(double s, Vec a) {
    for (double& x : a) x *= s;
    return a;
}

inline Vec normalized(Vec a) {
    double n = norm2(a);
    if (n == 0.0) throw InvalidInput("cannot normalize zero vector");
    return (1.0 / n) * std::move(a);
}

inline double dist2(const Vec& a, const Vec& b) { return norm2(a - b); }

/// Dense row-major matrix, sized for Jacobians of chart maps (dims <= 8 or so).
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Mat diag(std::initializer_list<double> d) {
        Mat m(static_cast<int>(d.size()), static_cast<int>(d.size()));
        int i = 0;
        for (double x : d) m(i, i) = x, ++i;
        return m;
    }

    static Mat from_columns(const std::vector<Vec>& cols_in) {
        Mat m(static_cast<int>(cols_in.empty() ? 0 : cols_in[0].size()),
              static_cast<int>(cols_in.size()));
        for (int j = 0; j < m.cols; ++j)
            for (int i = 0; i < m.rows; ++i) m(i, j) = cols_in[j][i];
        return m;
    }

    Vec col(int j) const {
        Vec v(rows);
        for (int i = 0; i < rows; ++i) v[i] = (*this)(i, j);
        return v;
    }

    Vec row(int i) const {
        Vec v(cols);
        for (int j = 0; j < cols; ++j) v[j] = (*this)(i, j);
        return v;
    }

    bool finite() const {
        for (double x : a)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double frobenius2() const {
        double s = 0.0;
        for (double x : a) s += x * x;
        return s;
    }
};

inline Mat transpose(const Mat& m) {
    Mat t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

inline Mat operator*(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw InvalidInput("matrix product shape mismatch");
    Mat z(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            double v = x(i, k);
            if (v == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) z(i, j) += v * y(k, j);
        }
    return z;
}

inline Vec operator*(const Mat& m, const Vec& v) {
    if (static_cast<int>(v.size()) != m.cols) throw InvalidInput("matrix-vector shape mismatch");
    Vec out(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out[i] += m(i, j) * v[j];
    return out;
}

/// Gaussian elimination with partial pivoting.  Returns nullopt when the
/// smallest pivot falls under `pivot_tol` (treated as singular).
inline std::optional<Vec> solve(Mat m, Vec b, double pivot_tol = 1e-12) {
    if (m.rows != m.cols || static_cast<int>(b.size()) != m.rows)
        throw InvalidInput("solve expects a square system");
    const int n = m.rows;
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(m(i, k)) > std::fabs(m(piv, k))) piv = i;
        if (std::fabs(m(piv, k)) < pivot_tol) return std::nullopt;
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(m(piv, j), m(k, j));
            std::swap(b[piv], b[k]);
        }
        for (int i = k + 1; i < n; ++i) {
            double f = m(i, k) / m(k, k);
            m(i, k) = 0.0;
            for (int j = k + 1; j < n; ++j) m(i, j) -= f * m(k, j);
            b[i] -= f * b[k];
        }
    }
    Vec x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= m(i, j) * x[j];
        x[i] = s / m(i, i);
    }
    return x;
}

struct Svd {
    Mat u;                    // rows x r, orthonormal columns (r = min(rows, cols))
    std::vector<double> s;    // descending
    Mat v;                    // cols x r, orthonormal columns
};

namespace detail {

/// One-sided Jacobi on the columns of b (rows >= cols assumed by caller).
/// Rotations are accumulated into v.
inline void jacobi_orthogonalize(Mat& b, Mat& v) {
    const int n = b.cols;
    const double tol = 1e-12;
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (int i = 0; i < b.rows; ++i) {
                    app += b(i, p) * b(i, p);
                    aqq += b(i, q) * b(i, q);
                    apq += b(i, p) * b(i, q);
                }
                double denom = std::sqrt(app * aqq);
                if (denom == 0.0 || std::fabs(apq) <= tol * denom) continue;
                off = std::max(off, std::fabs(apq) / denom);
                double tau = (aqq - app) / (2.0 * apq);
                double t = (tau >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (int i = 0; i < b.rows; ++i) {
                    double bp = b(i, p), bq = b(i, q);
                    b(i, p) = c * bp - s * bq;
                    b(i, q) = s * bp + c * bq;
                }
                for (int i = 0; i < v.rows; ++i) {
                    double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (off == 0.0) break;
    }
}

}  // namespace detail

/// Full SVD of a small matrix via one-sided Jacobi iteration.
inline Svd svd(const Mat& m) {
    if (!m.finite()) throw InvalidInput("singular_values: non-finite entry");
    if (m.rows == 0 || m.cols == 0) return Svd{Mat(m.rows, 0), {}, Mat(m.cols, 0)};
    const bool flipped = m.rows < m.cols;
    Mat b = flipped ? transpose(m) : m;
    Mat v = Mat::identity(b.cols);
    detail::jacobi_orthogonalize(b, v);

    const int r = b.cols;  // = min(rows, cols)
    std::vector<int> order(r);
    std::vector<double> norms(r);
    for (int j = 0; j < r; ++j) {
        order[j] = j;
        norms[j] = norm2(b.col(j));
    }
    std::sort(order.begin(), order.end(), [&](int x, int y) { return norms[x] > norms[y]; });

    Svd out;
    out.s.resize(r);
    Mat u(b.rows, r), w(v.rows, r);
    for (int j = 0; j < r; ++j) {
        int src = order[j];
        out.s[j] = norms[src];
        for (int i = 0; i < b.rows; ++i)
            u(i, j) = norms[src] > 0.0 ? b(i, src) / norms[src] : 0.0;
        for (int i = 0; i < v.rows; ++i) w(i, j) = v(i, src);
    }
    if (flipped) {
        out.u = w;
        out.v = u;
    } else {
        out.u = u;
        out.v = w;
    }
    return out;
}

/// Singular values in descending order; length = min(rows, cols).
inline std::vector<double> singular_values(const Mat& m) { return svd(m).s; }

/// A Jacobian evaluated at one chart point, with its singular values cached.
struct JacobianSample {
    Vec point;
    Mat matrix;
    std::vector<double> sv;

    static JacobianSample from(Vec point, Mat matrix) {
        JacobianSample j;
        j.sv = singular_values(matrix);
        j.point = std::move(point);
        j.matrix = std::move(matrix);
        return j;
    }
};

/// Pointwise k-dilation: the product of the top k singular values, with
/// missing values treated as zero.
inline double local_k_dilation(const JacobianSample& j, int k) {
    const int domain_dim = j.matrix.cols;
    if (k < 1 || k > domain_dim)
        throw InvalidInput("local_k_dilation: k out of range [1, domain dim]");
    double prod = 1.0;
    for (int i = 0; i < k; ++i)
        prod *= (i < static_cast<int>(j.sv.size())) ? j.sv[i] : 0.0;
    return prod;
}

/// Product of the k smallest singular values (padded with zeros below
/// min(rows, cols)); certificate quantity for k-expanding embeddings.
inline double smallest_k_product(const std::vector<double>& sv, int domain_dim, int k) {
    if (k < 1 || k > domain_dim) throw InvalidInput("smallest_k_product: k out of range");
    double prod = 1.0;
    for (int i = domain_dim - k; i < domain_dim; ++i)
        prod *= (i < static_cast<int>(sv.size())) ? sv[i] : 0.0;
    return prod;
}

}  // namespace kdl

#endif  // KDL_LINALG_HPP
