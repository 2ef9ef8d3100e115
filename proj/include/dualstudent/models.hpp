#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dualstudent/graph.hpp"
#include "dualstudent/rng.hpp"
#include "dualstudent/tensor.hpp"

namespace dualstudent::models {

/// Architecture recipe: input dim, hidden widths..., class count.
struct MlpSpec {
    std::vector<std::size_t> layer_widths{2, 64, 64, 2};
    double activation_slope = 0.1;
    double dropout_p = 0.0;
    double input_noise_std = 0.0;

    std::size_t input_dim() const { return layer_widths.front(); }
    std::size_t class_count() const { return layer_widths.back(); }
    std::size_t layer_count() const { return layer_widths.size() - 1; }
    /// Throws ConfigError unless there is a hidden layer, ≥ 2 classes and
    /// the scalar fields are in range.
    void validate() const;

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Weights and biases, interleaved: W₀[d₀×d₁], b₀[d₁], W₁, b₁, ...
struct ModelParams {
    std::vector<Tensor> tensors;

    Tensor& weight(std::size_t layer) { return tensors[2 * layer]; }
    const Tensor& weight(std::size_t layer) const { return tensors[2 * layer]; }
    Tensor& bias(std::size_t layer) { return tensors[2 * layer + 1]; }
    const Tensor& bias(std::size_t layer) const { return tensors[2 * layer + 1]; }
    std::size_t parameter_count() const;
    bool all_finite() const;
    bool matches(const MlpSpec& spec) const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

enum class Mode { train, eval };

/// Weights ~ N(0, 2/fan_in), biases zero.
ModelParams init_params(const MlpSpec& spec, Rng rng);

/// Records a forward pass on `graph` and returns the softmax output [b×n].
/// Train mode adds input noise and applies dropout after every hidden
/// activation, drawing from streams derived from `rng`; eval mode ignores it.
/// Parameters are bound to `params` and receive gradients on backward().
Var forward(Graph& graph, ModelParams& params, const MlpSpec& spec, Var x, Mode mode, Rng rng);

/// Same as forward() but treats the parameters as constants.
Var forward_frozen(Graph& graph, const ModelParams& params, const MlpSpec& spec, Var x, Mode mode, Rng rng);

/// Eval-mode class probabilities without retaining a graph.
Tensor predict(const ModelParams& params, const MlpSpec& spec, const Tensor& x);

/// teacher ← α·teacher + (1 − α)·student, entrywise.
void ema_update(ModelParams& teacher, const ModelParams& student, double alpha);

/// Euclidean norm of the concatenated parameter differences.
double weight_distance(const ModelParams& a, const ModelParams& b);

// Checkpoints are text: a header with the spec, then each tensor's shape
// followed by its values in shortest round-trip form.
void write_checkpoint(std::ostream& out, const MlpSpec& spec, const ModelParams& params);
void read_checkpoint(std::istream& in, MlpSpec& spec, ModelParams& params);
void save_checkpoint(const std::string& path, const MlpSpec& spec, const ModelParams& params);
void load_checkpoint(const std::string& path, MlpSpec& spec, ModelParams& params);

}  // namespace dualstudent::models
