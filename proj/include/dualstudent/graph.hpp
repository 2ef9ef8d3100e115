#pragma once

// Reverse-mode differentiation over a recorded tape of tensor ops.
//
// A Graph owns every intermediate value created while building a loss. Leaves
// are either constants, free inputs that keep their own gradient, or bound
// parameters whose gradient is accumulated into an external Tensor::grad on
// backward(). Nodes are appended in execution order, so the tape is always
// topologically sorted.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "dualstudent/rng.hpp"
#include "dualstudent/tensor.hpp"

namespace dualstudent {

class Graph;

/// Handle to a value recorded on a Graph.
struct Var {
    Graph* graph = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    bool requires_grad() const;
};

class Graph {
public:
    using BackwardFn = std::function<void(Graph&, std::size_t self)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value);
    /// Leaf with its own gradient slot, read back with grad().
    Var input(Tensor value);
    /// Leaf bound to `param`; backward() adds d(loss)/d(param) into param.grad.
    /// The tensor must outlive the graph.
    Var parameter(Tensor& param);

    /// Appends an op node. `inputs` must already be on this graph.
    Var record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

    /// Seeds d(loss)/d(loss) = 1 and propagates to every leaf. Throws
    /// InputError if loss is not a scalar.
    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    /// Gradient of a node from the last backward(); empty if none.
    std::span<const double> grad(Var v) const { return nodes_.at(v.id).grad; }

    std::size_t size() const noexcept { return nodes_.size(); }
    std::string_view op_name(std::size_t id) const { return nodes_.at(id).op; }
    std::span<const std::size_t> inputs_of(std::size_t id) const { return nodes_.at(id).inputs; }

    // Used by op backward closures.
    std::span<const double> grad_of(std::size_t id) const { return nodes_[id].grad; }
    std::span<double> grad_slot(std::size_t id) { return nodes_[id].grad; }
    const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
    bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

private:
    struct Node {
        std::string_view op;
        Tensor value;
        std::vector<double> grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        Tensor* bound = nullptr;
        bool requires_grad = false;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
};

using Labels = std::vector<int>;
using Mask = std::vector<std::uint8_t>;

// Differentiable ops. Shape errors throw ShapeError.

/// a[m×k] · b[k×n]
Var matmul(Var a, Var b);
/// x[m×n] + bias broadcast over rows; bias has n elements.
Var add_bias(Var x, Var bias);
/// max(x, slope·x) elementwise; slope in [0, 1).
Var leaky_relu(Var x, double slope);
/// Row-wise softmax with max-subtraction.
Var softmax(Var logits);
/// Mean of −log(p_true) over the rows selected by `mask` (all rows when the
/// mask is empty). Zero when no row is selected. When `probs` is a softmax
/// node the loss and its gradient are computed from the logits; otherwise
/// p_true is floored at 1e−12 and rows below the floor get no gradient.
/// Labels outside [0, n) throw InputError.
Var cross_entropy(Var probs, std::span<const int> labels, std::span<const std::uint8_t> mask = {});
/// Per-row squared Euclidean distance summed over columns, averaged over rows.
Var mse(Var a, Var b);
/// (1/denominator) · Σ_r weight[r] · ‖a_r − b_r‖².
Var weighted_row_sq_dist(Var a, Var b, std::span<const double> weights, double denominator);
/// Training: zero each element with probability p and scale survivors by
/// 1/(1−p). Eval or p == 0: identity.
Var dropout(Var x, double p, Rng& rng, bool training);
/// x + N(0, std²) elementwise.
Var gaussian_noise(Var x, double std, Rng& rng);
/// Same value, no gradient flows back through it.
Var detach(Var x);
Var sum(Var x);
Var scale(Var x, double factor);
Var add(Var a, Var b);

inline constexpr double kProbabilityFloor = 1e-12;

}  // namespace dualstudent
