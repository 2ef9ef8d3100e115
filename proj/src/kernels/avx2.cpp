// Compiled with -mavx2 only (no FMA): each lane performs the same multiply
// then add as the scalar loop, which keeps results bit-identical.

#include "kernels_impl.hpp"

#include <immintrin.h>

#include <algorithm>

namespace dualstudent::kernels::avx2 {

namespace {

constexpr std::size_t kLanes = 4;

inline void axpy_row(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t j = 0;
    for (; j + 2 * kLanes <= n; j += 2 * kLanes) {
        __m256d y0 = _mm256_loadu_pd(y + j);
        __m256d y1 = _mm256_loadu_pd(y + j + kLanes);
        y0 = _mm256_add_pd(y0, _mm256_mul_pd(va, _mm256_loadu_pd(x + j)));
        y1 = _mm256_add_pd(y1, _mm256_mul_pd(va, _mm256_loadu_pd(x + j + kLanes)));
        _mm256_storeu_pd(y + j, y0);
        _mm256_storeu_pd(y + j + kLanes, y1);
    }
    for (; j + kLanes <= n; j += kLanes) {
        __m256d y0 = _mm256_loadu_pd(y + j);
        y0 = _mm256_add_pd(y0, _mm256_mul_pd(va, _mm256_loadu_pd(x + j)));
        _mm256_storeu_pd(y + j, y0);
    }
    for (; j < n; ++j) y[j] += alpha * x[j];
}

// C rows are updated in register tiles of two rows by 16 columns. Each
// element still accumulates its products in ascending inner index order,
// exactly like the scalar loop.
//
// c[r, j] += sum_p a(r, p) * b[p, j], with a(r, p) read through a_at.
template <typename AAt>
void gemm_tiles(AAt a_at, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    constexpr std::size_t kTile = 4 * kLanes;
    std::size_t j0 = 0;
    for (; j0 + kTile <= n; j0 += kTile) {
        std::size_t r = 0;
        for (; r + 2 <= m; r += 2) {
            double* c0 = c + r * n + j0;
            double* c1 = c0 + n;
            __m256d x0 = _mm256_loadu_pd(c0), x1 = _mm256_loadu_pd(c0 + 4), x2 = _mm256_loadu_pd(c0 + 8),
                    x3 = _mm256_loadu_pd(c0 + 12);
            __m256d y0 = _mm256_loadu_pd(c1), y1 = _mm256_loadu_pd(c1 + 4), y2 = _mm256_loadu_pd(c1 + 8),
                    y3 = _mm256_loadu_pd(c1 + 12);
            for (std::size_t p = 0; p < k; ++p) {
                const double* bp = b + p * n + j0;
                const __m256d b0 = _mm256_loadu_pd(bp), b1 = _mm256_loadu_pd(bp + 4), b2 = _mm256_loadu_pd(bp + 8),
                              b3 = _mm256_loadu_pd(bp + 12);
                const __m256d a0 = _mm256_set1_pd(a_at(r, p));
                const __m256d a1 = _mm256_set1_pd(a_at(r + 1, p));
                x0 = _mm256_add_pd(x0, _mm256_mul_pd(a0, b0));
                x1 = _mm256_add_pd(x1, _mm256_mul_pd(a0, b1));
                x2 = _mm256_add_pd(x2, _mm256_mul_pd(a0, b2));
                x3 = _mm256_add_pd(x3, _mm256_mul_pd(a0, b3));
                y0 = _mm256_add_pd(y0, _mm256_mul_pd(a1, b0));
                y1 = _mm256_add_pd(y1, _mm256_mul_pd(a1, b1));
                y2 = _mm256_add_pd(y2, _mm256_mul_pd(a1, b2));
                y3 = _mm256_add_pd(y3, _mm256_mul_pd(a1, b3));
            }
            _mm256_storeu_pd(c0, x0), _mm256_storeu_pd(c0 + 4, x1), _mm256_storeu_pd(c0 + 8, x2),
                _mm256_storeu_pd(c0 + 12, x3);
            _mm256_storeu_pd(c1, y0), _mm256_storeu_pd(c1 + 4, y1), _mm256_storeu_pd(c1 + 8, y2),
                _mm256_storeu_pd(c1 + 12, y3);
        }
        for (; r < m; ++r) {
            double* c0 = c + r * n + j0;
            __m256d x0 = _mm256_loadu_pd(c0), x1 = _mm256_loadu_pd(c0 + 4), x2 = _mm256_loadu_pd(c0 + 8),
                    x3 = _mm256_loadu_pd(c0 + 12);
            for (std::size_t p = 0; p < k; ++p) {
                const double* bp = b + p * n + j0;
                const __m256d a0 = _mm256_set1_pd(a_at(r, p));
                x0 = _mm256_add_pd(x0, _mm256_mul_pd(a0, _mm256_loadu_pd(bp)));
                x1 = _mm256_add_pd(x1, _mm256_mul_pd(a0, _mm256_loadu_pd(bp + 4)));
                x2 = _mm256_add_pd(x2, _mm256_mul_pd(a0, _mm256_loadu_pd(bp + 8)));
                x3 = _mm256_add_pd(x3, _mm256_mul_pd(a0, _mm256_loadu_pd(bp + 12)));
            }
            _mm256_storeu_pd(c0, x0), _mm256_storeu_pd(c0 + 4, x1), _mm256_storeu_pd(c0 + 8, x2),
                _mm256_storeu_pd(c0 + 12, x3);
        }
    }
    if (j0 == n) return;
    for (std::size_t r = 0; r < m; ++r) {
        double* crow = c + r * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double arp = a_at(r, p);
            const double* brow = b + p * n;
            std::size_t j = j0;
            const __m256d va = _mm256_set1_pd(arp);
            for (; j + kLanes <= n; j += kLanes) {
                _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j),
                                                         _mm256_mul_pd(va, _mm256_loadu_pd(brow + j))));
            }
            for (; j < n; ++j) crow[j] += arp * brow[j];
        }
    }
}

}  // namespace

void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
              std::size_t m, std::size_t k, std::size_t n) {
    const double* ad = a.data();
    gemm_tiles([ad, k](std::size_t r, std::size_t p) { return ad[r * k + p]; }, b.data(), c.data(), m, k, n);
}

// c[p, j] += sum_i a[i, p] * b[i, j]: the same tiling with a read transposed
// and i as the inner index.
void gemm_at_b_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
    const double* ad = a.data();
    gemm_tiles([ad, k](std::size_t r, std::size_t i) { return ad[i * k + r]; }, b.data(), c.data(), k, m, n);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    axpy_row(alpha, x.data(), y.data(), y.size());
}

void lerp(double alpha, std::span<const double> s, std::span<double> t) {
    const double beta = 1.0 - alpha;
    const __m256d va = _mm256_set1_pd(alpha);
    const __m256d vb = _mm256_set1_pd(beta);
    const std::size_t n = t.size();
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d vt = _mm256_loadu_pd(t.data() + i);
        const __m256d vs = _mm256_loadu_pd(s.data() + i);
        _mm256_storeu_pd(t.data() + i, _mm256_add_pd(_mm256_mul_pd(va, vt), _mm256_mul_pd(vb, vs)));
    }
    for (; i < n; ++i) t[i] = alpha * t[i] + beta * s[i];
}

void nesterov(std::span<double> param, std::span<const double> grad, std::span<double> buf,
              double lr, double momentum, double weight_decay) {
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d vm = _mm256_set1_pd(momentum);
    const __m256d vwd = _mm256_set1_pd(weight_decay);
    const std::size_t n = param.size();
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        __m256d p = _mm256_loadu_pd(param.data() + i);
        const __m256d g = _mm256_add_pd(_mm256_loadu_pd(grad.data() + i), _mm256_mul_pd(vwd, p));
        __m256d v = _mm256_loadu_pd(buf.data() + i);
        v = _mm256_add_pd(_mm256_mul_pd(vm, v), g);
        p = _mm256_sub_pd(p, _mm256_mul_pd(vlr, _mm256_add_pd(g, _mm256_mul_pd(vm, v))));
        _mm256_storeu_pd(buf.data() + i, v);
        _mm256_storeu_pd(param.data() + i, p);
    }
    for (; i < n; ++i) {
        const double g = grad[i] + weight_decay * param[i];
        buf[i] = momentum * buf[i] + g;
        param[i] -= lr * (g + momentum * buf[i]);
    }
}

void leaky_relu(std::span<const double> x, std::span<double> y, double slope) {
    const __m256d vs = _mm256_set1_pd(slope);
    const std::size_t n = x.size();
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d vx = _mm256_loadu_pd(x.data() + i);
        _mm256_storeu_pd(y.data() + i, _mm256_max_pd(vx, _mm256_mul_pd(vs, vx)));
    }
    for (; i < n; ++i) y[i] = std::max(x[i], slope * x[i]);
}

void leaky_relu_backward(std::span<const double> x, std::span<const double> gy,
                         std::span<double> gx, double slope) {
    const __m256d vs = _mm256_set1_pd(slope);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d zero = _mm256_setzero_pd();
    const std::size_t n = x.size();
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x.data() + i), zero, _CMP_GT_OQ);
        const __m256d factor = _mm256_blendv_pd(vs, one, mask);
        const __m256d g = _mm256_add_pd(_mm256_loadu_pd(gx.data() + i),
                                        _mm256_mul_pd(_mm256_loadu_pd(gy.data() + i), factor));
        _mm256_storeu_pd(gx.data() + i, g);
    }
    for (; i < n; ++i) gx[i] += gy[i] * (x[i] > 0.0 ? 1.0 : slope);
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n = a.size();
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    alignas(32) double lanes[kLanes];
    _mm256_store_pd(lanes, acc);
    double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return total;
}

}  // namespace dualstudent::kernels::avx2
