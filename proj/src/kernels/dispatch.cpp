#include "kernels_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace dualstudent::kernels {

namespace {

const KernelTable kScalar{
    "scalar",
    &scalar::gemm_acc,
    &scalar::gemm_at_b_acc,
    &scalar::axpy,
    &scalar::lerp,
    &scalar::nesterov,
    &scalar::leaky_relu,
    &scalar::leaky_relu_backward,
    &scalar::sum_sq_diff,
};

#if defined(DUALSTUDENT_HAVE_AVX2)
const KernelTable kAvx2{
    "avx2",
    &avx2::gemm_acc,
    &avx2::gemm_at_b_acc,
    &avx2::axpy,
    &avx2::lerp,
    &avx2::nesterov,
    &avx2::leaky_relu,
    &avx2::leaky_relu_backward,
    &avx2::sum_sq_diff,
};
#endif

const KernelTable* initial_table() {
    const char* env = std::getenv("DUALSTUDENT_KERNELS");
    const std::string choice = env ? env : "auto";
    if (choice == "scalar") return &kScalar;
    if (const KernelTable* simd = avx2_table()) return simd;
    return &kScalar;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(DUALSTUDENT_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(Backend backend) {
    const KernelTable* table = nullptr;
    switch (backend) {
        case Backend::scalar: table = &kScalar; break;
        case Backend::avx2: table = avx2_table(); break;
        case Backend::automatic: table = avx2_table() ? avx2_table() : &kScalar; break;
    }
    if (!table) return false;
    current().store(table, std::memory_order_release);
    return true;
}

}  // namespace dualstudent::kernels
