#pragma once

// Dense double-precision inner loops.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant selected at runtime. Element-wise and matrix kernels perform the
// same floating-point operations in the same order in both variants, so their
// results are bit-identical. Only the horizontal reductions (sum_sq_diff)
// reassociate and agree to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace dualstudent::kernels {

struct KernelTable {
    std::string_view name;

    // c[m×n] += a[m×k] · b[k×n]
    void (*gemm_acc)(std::span<const double> a, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n);
    // c[k×n] += aᵀ · b   with a[m×k], b[m×n]
    void (*gemm_at_b_acc)(std::span<const double> a, std::span<const double> b, std::span<double> c,
                          std::size_t m, std::size_t k, std::size_t n);
    // y += alpha · x
    void (*axpy)(double alpha, std::span<const double> x, std::span<double> y);
    // t = alpha · t + (1 − alpha) · s
    void (*lerp)(double alpha, std::span<const double> s, std::span<double> t);
    // Nesterov momentum step with L2 weight decay folded into the gradient.
    void (*nesterov)(std::span<double> param, std::span<const double> grad, std::span<double> buf,
                     double lr, double momentum, double weight_decay);
    // y = max(x, slope · x)
    void (*leaky_relu)(std::span<const double> x, std::span<double> y, double slope);
    // gx += gy · (x > 0 ? 1 : slope)
    void (*leaky_relu_backward)(std::span<const double> x, std::span<const double> gy,
                                std::span<double> gx, double slope);
    // Σ (a − b)²
    double (*sum_sq_diff)(std::span<const double> a, std::span<const double> b);
};

enum class Backend { automatic, scalar, avx2 };

const KernelTable& scalar_table();

/// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table();

/// Kernel table in use. Initialised from DUALSTUDENT_KERNELS (scalar|avx2|auto)
/// on first call; `select` overrides it.
const KernelTable& active();

/// Returns false if the requested backend is unavailable (the active table is
/// left unchanged).
bool select(Backend backend);

}  // namespace dualstudent::kernels
