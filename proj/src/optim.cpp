#include "dualstudent/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dualstudent/errors.hpp"
#include "dualstudent/kernels.hpp"

namespace dualstudent {

SgdState SgdState::for_params(std::span<const Tensor> params, double momentum, double weight_decay) {
    SgdState state;
    state.momentum = momentum;
    state.weight_decay = weight_decay;
    state.momentum_buffers.reserve(params.size());
    for (const Tensor& p : params) state.momentum_buffers.emplace_back(p.size(), 0.0);
    return state;
}

void sgd_step(std::span<Tensor> params, SgdState& state, double lr) {
    if (state.momentum_buffers.size() != params.size()) {
        throw StateError("sgd_step: optimizer tracks " + std::to_string(state.momentum_buffers.size()) +
                         " tensors, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) throw StateError("sgd_step: tensor " + std::to_string(i) + " has no gradient");
        if (state.momentum_buffers[i].size() != params[i].size()) {
            throw StateError("sgd_step: momentum buffer " + std::to_string(i) + " has the wrong size");
        }
    }
    const auto& ks = kernels::active();
    for (std::size_t i = 0; i < params.size(); ++i) {
        ks.nesterov(params[i].values, params[i].grad, state.momentum_buffers[i], lr, state.momentum,
                    state.weight_decay);
        params[i].clear_grad();
    }
}

double cosine_lr(std::int64_t step, std::int64_t n_total, double gamma0) {
    if (step < 1 || n_total < 1) throw InputError("cosine_lr: need step >= 1 and n_total >= 1");
    const double phase = static_cast<double>(step - 1) * std::numbers::pi / static_cast<double>(n_total);
    return std::max(0.0, gamma0 * (0.5 + std::cos(phase)));
}

}  // namespace dualstudent
