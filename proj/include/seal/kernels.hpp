#pragma once

// Dense kernels used by the tiny transformer and the analysis code.
//
// Every kernel exists twice: `serial` is the reference and `parallel` splits
// the independent outputs across OpenMP threads. Each output element is still
// reduced in the same order as in the serial version, so both produce
// bit-identical results for any thread count.
//
// Matrices are row-major and passed as a pointer plus dimensions.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <omp.h>

namespace seal::kernels {

// below this many multiply-adds the parallel kernels run on one thread
inline constexpr size_t kParallelThreshold = 1 << 15;

namespace detail {

// Fixed-order dot product: eight strided partial sums combined pairwise.
// The order is part of the numerical contract (no compiler reassociation).
template <typename Real>
inline Real dot(const Real * a, const Real * b, size_t n) {
    Real lane[8] = {};
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (size_t j = 0; j < 8; ++j) {
            lane[j] += a[i + j] * b[i + j];
        }
    }
    for (size_t j = 0; j < 8 && i + j < n; ++j) {
        lane[j] += a[i + j] * b[i + j];
    }
    return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
}

template <typename Real>
inline void linear_row(const Real * x, const Real * w, const Real * b, Real * y, size_t in, size_t out) {
    for (size_t o = 0; o < out; ++o) {
        y[o] = (b ? b[o] : Real(0)) + dot(w + o * in, x, in);
    }
}

template <typename Real>
inline void backprop_input_row(const Real * dy, const Real * w, Real * dx, size_t in, size_t out) {
    for (size_t i = 0; i < in; ++i) {
        dx[i] = Real(0);
    }
    for (size_t o = 0; o < out; ++o) {
        const Real g = dy[o];
        const Real * wr = w + o * in;
        for (size_t i = 0; i < in; ++i) {
            dx[i] += g * wr[i];
        }
    }
}

template <typename Real>
inline void accumulate_weight_row(const Real * dy, const Real * x, Real * dw, Real * db, size_t n, size_t in,
                                  size_t out, size_t o) {
    Real * dwr = dw + o * in;
    Real bacc = Real(0);
    for (size_t t = 0; t < n; ++t) {
        const Real g = dy[t * out + o];
        if (g == Real(0)) {
            continue;
        }
        const Real * xr = x + t * in;
        for (size_t i = 0; i < in; ++i) {
            dwr[i] += g * xr[i];
        }
        bacc += g;
    }
    if (db) {
        db[o] += bacc;
    }
}

template <typename Real>
inline Real sq_distance(const Real * a, const Real * b, size_t d) {
    Real acc = Real(0);
    for (size_t k = 0; k < d; ++k) {
        const Real diff = a[k] - b[k];
        acc += diff * diff;
    }
    return acc;
}

} // namespace detail

namespace serial {

// y[n x out] = x[n x in] * w[out x in]^T + b
template <typename Real>
void linear(const Real * x, const Real * w, const Real * b, Real * y, size_t n, size_t in, size_t out) {
    for (size_t t = 0; t < n; ++t) {
        detail::linear_row(x + t * in, w, b, y + t * out, in, out);
    }
}

// dx[n x in] = dy[n x out] * w[out x in]
template <typename Real>
void linear_backward_input(const Real * dy, const Real * w, Real * dx, size_t n, size_t in, size_t out) {
    for (size_t t = 0; t < n; ++t) {
        detail::backprop_input_row(dy + t * out, w, dx + t * in, in, out);
    }
}

// dw[out x in] += dy^T x ; db[out] += column sums of dy
template <typename Real>
void linear_backward_weights(const Real * dy, const Real * x, Real * dw, Real * db, size_t n, size_t in,
                             size_t out) {
    for (size_t o = 0; o < out; ++o) {
        detail::accumulate_weight_row(dy, x, dw, db, n, in, out, o);
    }
}

// d[n x n] squared Euclidean distances between rows of x[n x dim]
template <typename Real>
void pairwise_sq_distances(const Real * x, Real * d, size_t n, size_t dim) {
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            d[i * n + j] = detail::sq_distance(x + i * dim, x + j * dim, dim);
        }
    }
}

// dst[i] = sum over rows of src (accumulated in row order)
template <typename Real, typename Acc>
void column_sums(const Real * src, Acc * dst, size_t n, size_t dim) {
    for (size_t k = 0; k < dim; ++k) {
        Acc acc = Acc(0);
        for (size_t t = 0; t < n; ++t) {
            acc += static_cast<Acc>(src[t * dim + k]);
        }
        dst[k] = acc;
    }
}

} // namespace serial

namespace parallel {

template <typename Real>
void linear(const Real * x, const Real * w, const Real * b, Real * y, size_t n, size_t in, size_t out) {
    const bool big = n * in * out >= kParallelThreshold;
    #pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(n); ++t) {
        detail::linear_row(x + t * in, w, b, y + t * out, in, out);
    }
}

template <typename Real>
void linear_backward_input(const Real * dy, const Real * w, Real * dx, size_t n, size_t in, size_t out) {
    const bool big = n * in * out >= kParallelThreshold;
    #pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(n); ++t) {
        detail::backprop_input_row(dy + t * out, w, dx + t * in, in, out);
    }
}

template <typename Real>
void linear_backward_weights(const Real * dy, const Real * x, Real * dw, Real * db, size_t n, size_t in,
                             size_t out) {
    const bool big = n * in * out >= kParallelThreshold;
    #pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(out); ++o) {
        detail::accumulate_weight_row(dy, x, dw, db, n, in, out, static_cast<size_t>(o));
    }
}

template <typename Real>
void pairwise_sq_distances(const Real * x, Real * d, size_t n, size_t dim) {
    const bool big = n * n * dim >= kParallelThreshold;
    #pragma omp parallel for schedule(dynamic, 16) if (big)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        for (size_t j = 0; j < n; ++j) {
            d[i * n + j] = detail::sq_distance(x + i * dim, x + j * dim, dim);
        }
    }
}

template <typename Real, typename Acc>
void column_sums(const Real * src, Acc * dst, size_t n, size_t dim) {
    const bool big = n * dim >= kParallelThreshold;
    #pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(dim); ++k) {
        Acc acc = Acc(0);
        for (size_t t = 0; t < n; ++t) {
            acc += static_cast<Acc>(src[t * dim + k]);
        }
        dst[k] = acc;
    }
}

} // namespace parallel

} // namespace seal::kernels
