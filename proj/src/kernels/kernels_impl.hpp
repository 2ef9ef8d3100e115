#pragma once

#include "dualstudent/kernels.hpp"

namespace dualstudent::kernels {

namespace scalar {
void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
              std::size_t m, std::size_t k, std::size_t n);
void gemm_at_b_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void lerp(double alpha, std::span<const double> s, std::span<double> t);
void nesterov(std::span<double> param, std::span<const double> grad, std::span<double> buf,
              double lr, double momentum, double weight_decay);
void leaky_relu(std::span<const double> x, std::span<double> y, double slope);
void leaky_relu_backward(std::span<const double> x, std::span<const double> gy,
                         std::span<double> gx, double slope);
double sum_sq_diff(std::span<const double> a, std::span<const double> b);
}  // namespace scalar

#if defined(DUALSTUDENT_HAVE_AVX2)
namespace avx2 {
void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
              std::size_t m, std::size_t k, std::size_t n);
void gemm_at_b_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void lerp(double alpha, std::span<const double> s, std::span<double> t);
void nesterov(std::span<double> param, std::span<const double> grad, std::span<double> buf,
              double lr, double momentum, double weight_decay);
void leaky_relu(std::span<const double> x, std::span<double> y, double slope);
void leaky_relu_backward(std::span<const double> x, std::span<const double> gy,
                         std::span<double> gx, double slope);
double sum_sq_diff(std::span<const double> a, std::span<const double> b);
}  // namespace avx2
#endif

}  // namespace dualstudent::kernels
