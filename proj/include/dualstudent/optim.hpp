#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dualstudent/tensor.hpp"

namespace dualstudent {

struct SgdState {
    std::vector<std::vector<double>> momentum_buffers;
    double momentum = 0.9;
    double weight_decay = 0.0;

    /// Zero buffers shaped like `params`.
    static SgdState for_params(std::span<const Tensor> params, double momentum, double weight_decay);
};

/// Nesterov momentum step on every tensor in `params`:
///   g ← grad + weight_decay·θ;  v ← μ·v + g;  θ ← θ − lr·(g + μ·v)
/// Gradients are cleared afterwards. Throws StateError if a tensor has no
/// gradient or the buffers do not match.
void sgd_step(std::span<Tensor> params, SgdState& state, double lr);

/// γ₀·(0.5 + cos((t − 1)·π / n_total)), clamped below at 0. `step` counts from 1.
double cosine_lr(std::int64_t step, std::int64_t n_total, double gamma0);

}  // namespace dualstudent
