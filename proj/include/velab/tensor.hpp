#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "velab/rng.hpp"

namespace velab {

// Dense row-major double tensor. Shapes are small vectors of ints; all math
// in the project runs in double precision.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}
    Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(numel_of(shape), fill) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != static_cast<std::size_t>(numel_of(shape)))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static long numel_of(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    long numel() const { return static_cast<long>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    double& operator[](long i) { return data[static_cast<std::size_t>(i)]; }
    double operator[](long i) const { return data[static_cast<std::size_t>(i)]; }

    double& at2(int i, int j) { return data[static_cast<std::size_t>(i) * dim(1) + j]; }
    double at2(int i, int j) const { return data[static_cast<std::size_t>(i) * dim(1) + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v) { return Tensor(std::move(s), v); }
    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    static Tensor randn(std::vector<int> s, Rng& rng, double stddev = 1.0) {
        Tensor t(std::move(s));
        for (auto& v : t.data) v = rng.normal(0.0, stddev);
        return t;
    }

    static Tensor rand_uniform(std::vector<int> s, Rng& rng, double lo = 0.0, double hi = 1.0) {
        Tensor t(std::move(s));
        for (auto& v : t.data) v = rng.uniform(lo, hi);
        return t;
    }

    // Xavier-uniform for a [out, in] matrix
    static Tensor xavier(int out, int in, Rng& rng) {
        const double a = std::sqrt(6.0 / (out + in));
        return rand_uniform({out, in}, rng, -a, a);
    }

    // Kaiming-normal for a [out, in] matrix
    static Tensor kaiming(int out, int in, Rng& rng) {
        const double s = std::sqrt(2.0 / in);
        return randn({out, in}, rng, s);
    }
};

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// C[m,n] += A[m,k] * B[k,n]
inline void matmul_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = A + static_cast<std::size_t>(i) * k;
        double* ci = C + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double a = ai[p];
            if (a == 0.0) continue;
            const double* bp = B + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += a * bp[j];
        }
    }
}

// C[m,n] += A[m,k] * B^T where B is [n,k]
inline void matmul_bt_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = A + static_cast<std::size_t>(i) * k;
        double* ci = C + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] += dot(ai, B + static_cast<std::size_t>(j) * k, k);
    }
}

// C[m,n] += A^T * B where A is [k,m], B is [k,n]
inline void matmul_at_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const double* ap = A + static_cast<std::size_t>(p) * m;
        const double* bp = B + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double a = ap[i];
            if (a == 0.0) continue;
            double* ci = C + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += a * bp[j];
        }
    }
}

}  // namespace velab
