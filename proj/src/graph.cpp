#include "dualstudent/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dualstudent/errors.hpp"
#include "dualstudent/kernels.hpp"

namespace dualstudent {

const Tensor& Var::value() const { return graph->value(*this); }
bool Var::requires_grad() const { return graph->requires_grad(*this); }

Var Graph::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
    value.clear_grad();
    return push(Node{"constant", std::move(value), {}, {}, {}, nullptr, false});
}

Var Graph::input(Tensor value) {
    value.clear_grad();
    return push(Node{"input", std::move(value), {}, {}, {}, nullptr, true});
}

Var Graph::parameter(Tensor& param) {
    Tensor copy(param.shape, param.values);
    return push(Node{"parameter", std::move(copy), {}, {}, {}, &param, true});
}

Var Graph::record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
    bool needs = false;
    for (std::size_t id : inputs) {
        if (id >= nodes_.size()) throw StateError("graph: input recorded out of order");
        needs = needs || nodes_[id].requires_grad;
    }
    if (!needs) backward = nullptr;
    return push(Node{op, std::move(value), {}, std::move(inputs), std::move(backward), nullptr, needs});
}

void Graph::backward(Var loss) {
    if (loss.graph != this) throw InputError("backward: loss belongs to another graph");
    const Node& root = nodes_.at(loss.id);
    if (!root.value.is_scalar()) {
        throw InputError("backward: loss must be scalar, got " + shape_string(root.value.shape));
    }
    // Only ancestors of the loss take part; everything else keeps no gradient.
    std::vector<std::uint8_t> reachable(nodes_.size(), 0);
    reachable[loss.id] = 1;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        if (!reachable[i] || !nodes_[i].requires_grad) continue;
        for (std::size_t in : nodes_[i].inputs) reachable[in] = 1;
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Node& node = nodes_[i];
        if (node.requires_grad && reachable[i]) node.grad.assign(node.value.size(), 0.0);
        else node.grad.clear();
    }
    if (!root.requires_grad) return;
    nodes_[loss.id].grad[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.requires_grad || !reachable[i]) continue;
        if (node.backward) node.backward(*this, i);
        if (node.bound) {
            if (node.bound->grad.size() != node.grad.size()) node.bound->zero_grad();
            for (std::size_t k = 0; k < node.grad.size(); ++k) node.bound->grad[k] += node.grad[k];
        }
    }
}

namespace {

void require_same_graph(Var a, Var b) {
    if (a.graph != b.graph) throw InputError("ops: operands live on different graphs");
}

std::size_t rows_of(const Tensor& t) { return t.rank() == 2 ? t.shape[0] : 1; }
std::size_t cols_of(const Tensor& t) { return t.rank() == 2 ? t.shape[1] : t.size(); }

}  // namespace

Var matmul(Var a, Var b) {
    require_same_graph(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0]) {
        throw ShapeError("matmul: cannot multiply " + shape_string(av.shape) + " by " +
                         shape_string(bv.shape));
    }
    const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
    Tensor out = Tensor::zeros({m, n});
    kernels::active().gemm_acc(av.values, bv.values, out.values, m, k, n);
    return a.graph->record("matmul", std::move(out), {a.id, b.id}, [m, k, n, ai = a.id, bi = b.id](Graph& g, std::size_t self) {
        const auto& ks = kernels::active();
        const auto gy = g.grad_of(self);
        if (g.needs_grad(ai)) {
            const auto& bval = g.value_of(bi).values;
            std::vector<double> bt(n * k);
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = bval[p * n + j];
            ks.gemm_acc(gy, bt, g.grad_slot(ai), m, n, k);
        }
        if (g.needs_grad(bi)) ks.gemm_at_b_acc(g.value_of(ai).values, gy, g.grad_slot(bi), m, k, n);
    });
}

Var add_bias(Var x, Var bias) {
    require_same_graph(x, bias);
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    if (xv.rank() != 2 || bv.size() != xv.shape[1]) {
        throw ShapeError("add_bias: bias " + shape_string(bv.shape) + " does not fit " + shape_string(xv.shape));
    }
    const std::size_t m = xv.shape[0], n = xv.shape[1];
    Tensor out = xv;
    out.clear_grad();
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) out.values[r * n + c] += bv.values[c];
    return x.graph->record("add_bias", std::move(out), {x.id, bias.id}, [m, n, xi = x.id, bi = bias.id](Graph& g, std::size_t self) {
        const auto gy = g.grad_of(self);
        if (g.needs_grad(xi)) kernels::active().axpy(1.0, gy, g.grad_slot(xi));
        if (g.needs_grad(bi)) {
            auto gb = g.grad_slot(bi);
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < n; ++c) gb[c] += gy[r * n + c];
        }
    });
}

Var leaky_relu(Var x, double slope) {
    if (!(slope >= 0.0 && slope < 1.0)) throw InputError("leaky_relu: slope must lie in [0, 1)");
    const Tensor& xv = x.value();
    Tensor out(xv.shape, std::vector<double>(xv.size()));
    kernels::active().leaky_relu(xv.values, out.values, slope);
    return x.graph->record("leaky_relu", std::move(out), {x.id}, [slope, xi = x.id](Graph& g, std::size_t self) {
        kernels::active().leaky_relu_backward(g.value_of(xi).values, g.grad_of(self), g.grad_slot(xi), slope);
    });
}

Var softmax(Var logits) {
    const Tensor& xv = logits.value();
    const std::size_t m = rows_of(xv), n = cols_of(xv);
    if (n < 2) throw ShapeError("softmax: need at least two classes, got " + shape_string(xv.shape));
    Tensor out(xv.shape, std::vector<double>(xv.size()));
    for (std::size_t r = 0; r < m; ++r) {
        const double* in = xv.values.data() + r * n;
        double* o = out.values.data() + r * n;
        const double hi = *std::max_element(in, in + n);
        double total = 0.0;
        for (std::size_t c = 0; c < n; ++c) total += (o[c] = std::exp(in[c] - hi));
        for (std::size_t c = 0; c < n; ++c) o[c] /= total;
    }
    return logits.graph->record("softmax", std::move(out), {logits.id}, [m, n, xi = logits.id](Graph& g, std::size_t self) {
        const auto& y = g.value_of(self).values;
        const auto gy = g.grad_of(self);
        auto gx = g.grad_slot(xi);
        for (std::size_t r = 0; r < m; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < n; ++c) dot += gy[r * n + c] * y[r * n + c];
            for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += y[r * n + c] * (gy[r * n + c] - dot);
        }
    });
}

Var cross_entropy(Var probs, std::span<const int> labels, std::span<const std::uint8_t> mask) {
    const Tensor& pv = probs.value();
    const std::size_t m = rows_of(pv), n = cols_of(pv);
    if (labels.size() != m) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(m) + " rows");
    }
    if (!mask.empty() && mask.size() != m) throw ShapeError("cross_entropy: mask length mismatch");
    std::vector<std::size_t> picked;
    for (std::size_t r = 0; r < m; ++r) {
        if (!mask.empty() && !mask[r]) continue;
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= n) {
            throw InputError("cross_entropy: label " + std::to_string(labels[r]) + " outside [0, " +
                             std::to_string(n) + ")");
        }
        picked.push_back(r * n + static_cast<std::size_t>(labels[r]));
    }
    const double count = static_cast<double>(picked.size());
    Graph& graph = *probs.graph;

    // Softmax output: work from the logits, so the loss keeps a useful
    // gradient however small the true-class probability gets.
    if (graph.op_name(probs.id) == "softmax") {
        const std::size_t zi = graph.inputs_of(probs.id)[0];
        const auto& z = graph.value_of(zi).values;
        double total = 0.0;
        for (std::size_t idx : picked) {
            const std::size_t row = idx / n * n;
            const double hi = *std::max_element(z.begin() + static_cast<std::ptrdiff_t>(row),
                                                z.begin() + static_cast<std::ptrdiff_t>(row + n));
            double sum_exp = 0.0;
            for (std::size_t c = 0; c < n; ++c) sum_exp += std::exp(z[row + c] - hi);
            total += std::log(sum_exp) - (z[idx] - hi);
        }
        const double loss = picked.empty() ? 0.0 : total / count;
        return graph.record("cross_entropy", Tensor::scalar(loss), {zi},
                            [picked = std::move(picked), count, n, pi = probs.id, zi](Graph& g, std::size_t self) {
            const double gy = g.grad_of(self)[0];
            const auto& p = g.value_of(pi).values;
            auto gz = g.grad_slot(zi);
            for (std::size_t idx : picked) {
                const std::size_t row = idx / n * n;
                for (std::size_t c = 0; c < n; ++c) gz[row + c] += gy * p[row + c] / count;
                gz[idx] -= gy / count;
            }
        });
    }

    double total = 0.0;
    for (std::size_t idx : picked) total -= std::log(std::max(pv.values[idx], kProbabilityFloor));
    const double loss = picked.empty() ? 0.0 : total / count;
    return graph.record("cross_entropy", Tensor::scalar(loss), {probs.id},
                               [picked = std::move(picked), count, pi = probs.id](Graph& g, std::size_t self) {
        const double gy = g.grad_of(self)[0];
        const auto& p = g.value_of(pi).values;
        auto gp = g.grad_slot(pi);
        for (std::size_t idx : picked) {
            if (p[idx] > kProbabilityFloor) gp[idx] -= gy / (count * p[idx]);
        }
    });
}

Var weighted_row_sq_dist(Var a, Var b, std::span<const double> weights, double denominator) {
    require_same_graph(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_shape(av, bv, "weighted_row_sq_dist");
    const std::size_t m = rows_of(av), n = cols_of(av);
    if (weights.size() != m) throw ShapeError("weighted_row_sq_dist: weight count mismatch");
    if (!(denominator > 0.0)) throw InputError("weighted_row_sq_dist: denominator must be positive");
    double total = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        if (weights[r] == 0.0) continue;
        double row = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            const double d = av.values[r * n + c] - bv.values[r * n + c];
            row += d * d;
        }
        total += weights[r] * row;
    }
    std::vector<double> w(weights.begin(), weights.end());
    return a.graph->record("weighted_row_sq_dist", Tensor::scalar(total / denominator), {a.id, b.id},
                           [w = std::move(w), denominator, m, n, ai = a.id, bi = b.id](Graph& g, std::size_t self) {
        const double gy = g.grad_of(self)[0];
        const auto& x = g.value_of(ai).values;
        const auto& y = g.value_of(bi).values;
        const bool da = g.needs_grad(ai), db = g.needs_grad(bi);
        for (std::size_t r = 0; r < m; ++r) {
            if (w[r] == 0.0) continue;
            const double coef = 2.0 * gy * w[r] / denominator;
            for (std::size_t c = 0; c < n; ++c) {
                const double d = coef * (x[r * n + c] - y[r * n + c]);
                if (da) g.grad_slot(ai)[r * n + c] += d;
                if (db) g.grad_slot(bi)[r * n + c] -= d;
            }
        }
    });
}

Var mse(Var a, Var b) {
    const Tensor& av = a.value();
    require_same_shape(av, b.value(), "mse");
    const std::size_t m = rows_of(av);
    const std::vector<double> ones(m, 1.0);
    return weighted_row_sq_dist(a, b, ones, static_cast<double>(m));
}

Var dropout(Var x, double p, Rng& rng, bool training) {
    if (!(p >= 0.0 && p < 1.0)) throw InputError("dropout: p must lie in [0, 1)");
    const Tensor& xv = x.value();
    if (!training || p == 0.0) {
        Tensor out = xv;
        out.clear_grad();
        return x.graph->record("dropout", std::move(out), {x.id}, [xi = x.id](Graph& g, std::size_t self) {
            kernels::active().axpy(1.0, g.grad_of(self), g.grad_slot(xi));
        });
    }
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(xv.size());
    for (double& v : mask) v = rng.uniform() < p ? 0.0 : keep_scale;
    Tensor out(xv.shape, std::vector<double>(xv.size()));
    for (std::size_t i = 0; i < xv.size(); ++i) out.values[i] = xv.values[i] * mask[i];
    return x.graph->record("dropout", std::move(out), {x.id}, [mask = std::move(mask), xi = x.id](Graph& g, std::size_t self) {
        const auto gy = g.grad_of(self);
        auto gx = g.grad_slot(xi);
        for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += gy[i] * mask[i];
    });
}

Var gaussian_noise(Var x, double std, Rng& rng) {
    if (!(std >= 0.0)) throw InputError("gaussian_noise: std must be non-negative");
    Tensor out = x.value();
    out.clear_grad();
    if (std > 0.0) {
        for (double& v : out.values) v += std * rng.normal();
    }
    return x.graph->record("gaussian_noise", std::move(out), {x.id}, [xi = x.id](Graph& g, std::size_t self) {
        kernels::active().axpy(1.0, g.grad_of(self), g.grad_slot(xi));
    });
}

Var detach(Var x) {
    Tensor out = x.value();
    out.clear_grad();
    return x.graph->record("detach", std::move(out), {}, nullptr);
}

Var sum(Var x) {
    const Tensor& xv = x.value();
    double total = 0.0;
    for (double v : xv.values) total += v;
    return x.graph->record("sum", Tensor::scalar(total), {x.id}, [xi = x.id](Graph& g, std::size_t self) {
        const double gy = g.grad_of(self)[0];
        for (double& v : g.grad_slot(xi)) v += gy;
    });
}

Var scale(Var x, double factor) {
    Tensor out = x.value();
    out.clear_grad();
    for (double& v : out.values) v *= factor;
    return x.graph->record("scale", std::move(out), {x.id}, [factor, xi = x.id](Graph& g, std::size_t self) {
        kernels::active().axpy(factor, g.grad_of(self), g.grad_slot(xi));
    });
}

Var add(Var a, Var b) {
    require_same_graph(a, b);
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    out.clear_grad();
    const auto& bv = b.value().values;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += bv[i];
    return a.graph->record("add", std::move(out), {a.id, b.id}, [ai = a.id, bi = b.id](Graph& g, std::size_t self) {
        const auto gy = g.grad_of(self);
        if (g.needs_grad(ai)) kernels::active().axpy(1.0, gy, g.grad_slot(ai));
        if (g.needs_grad(bi)) kernels::active().axpy(1.0, gy, g.grad_slot(bi));
    });
}

}  // namespace dualstudent
