#include "kernels_impl.hpp"

#include <algorithm>

namespace dualstudent::kernels::scalar {

void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
              std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const double* brow = b.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void gemm_at_b_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* brow = b.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            double* crow = c.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

void lerp(double alpha, std::span<const double> s, std::span<double> t) {
    const double beta = 1.0 - alpha;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = alpha * t[i] + beta * s[i];
}

void nesterov(std::span<double> param, std::span<const double> grad, std::span<double> buf,
              double lr, double momentum, double weight_decay) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i] + weight_decay * param[i];
        buf[i] = momentum * buf[i] + g;
        param[i] -= lr * (g + momentum * buf[i]);
    }
}

void leaky_relu(std::span<const double> x, std::span<double> y, double slope) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::max(x[i], slope * x[i]);
}

void leaky_relu_backward(std::span<const double> x, std::span<const double> gy,
                         std::span<double> gx, double slope) {
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += gy[i] * (x[i] > 0.0 ? 1.0 : slope);
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace dualstudent::kernels::scalar
