#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the library's numerics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat c(a.size(), Vec(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b[0].size(); ++j)
            for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

inline Mat transpose(const Mat& a) {
    Mat t(a[0].size(), Vec(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
    return t;
}

/// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi, descending.
inline Vec symmetric_eigenvalues(Mat a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    Vec ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

/// Central differences of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

/// Central differences of a vector function: rows are outputs.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-5) {
    const std::size_t m = f(x).size();
    Mat j(m, Vec(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const Vec fp = f(xp), fm = f(xm);
        for (std::size_t r = 0; r < m; ++r) j[r][i] = (fp[r] - fm[r]) / (2.0 * h);
    }
    return j;
}

/// Softmax evaluated in long double.
inline std::vector<long double> softmax_ld(const Vec& a) {
    long double mx = *std::max_element(a.begin(), a.end());
    std::vector<long double> p(a.size());
    long double z = 0;
    for (std::size_t i = 0; i < a.size(); ++i) z += p[i] = std::exp(static_cast<long double>(a[i]) - mx);
    for (auto& v : p) v /= z;
    return p;
}

inline long double cross_entropy_ld(const Vec& a, std::size_t k) {
    long double mx = *std::max_element(a.begin(), a.end());
    long double z = 0;
    for (double v : a) z += std::exp(static_cast<long double>(v) - mx);
    return std::log(z) - (static_cast<long double>(a[k]) - mx);
}

/// Two-sided Kolmogorov-Smirnov statistic against U(lo, hi).
inline double ks_uniform(Vec xs, double lo, double hi) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = std::clamp((xs[i] - lo) / (hi - lo), 0.0, 1.0);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

/// Dense layer y = act(W x + b) with W given row-major as rows.
struct Layer {
    Mat w;
    Vec b;
    int act;  // 0 none, 1 tanh, 2 relu, 3 sign(0 -> +1)
};

inline Vec forward(const std::vector<Layer>& net, Vec x) {
    for (const Layer& l : net) {
        Vec y(l.w.size());
        for (std::size_t i = 0; i < l.w.size(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) s += l.w[i][j] * x[j];
            s += l.b[i];
            switch (l.act) {
                case 1: s = std::tanh(s); break;
                case 2: s = s > 0 ? s : 0.0; break;
                case 3: s = s >= 0 ? 1.0 : -1.0; break;
                default: break;
            }
            y[i] = s;
        }
        x = std::move(y);
    }
    return x;
}

inline double rel_err(const Vec& a, const Vec& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline Vec flatten(const Mat& m) {
    Vec v;
    for (const Vec& r : m) v.insert(v.end(), r.begin(), r.end());
    return v;
}

}  // namespace oracle
