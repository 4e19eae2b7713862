#pragma once

#include "apollo/parameter.hpp"
#include "apollo/tensor.hpp"

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

namespace apollo::ad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape; }
    std::size_t id() const { return id_; }
    Tape* tape() const { return tape_; }
    explicit operator bool() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the node list
// is already topologically sorted and backward() is a single reverse sweep.
//
// A Parameter enters the tape once (parameter() caches by address); every use
// site reads the same leaf, so its gradient is the sum over all uses. After
// backward() each leaf gradient is added into Parameter::grad.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&)>;

    // With record = false no backward closures are kept (evaluation only).
    explicit Tape(bool record = true) : record_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var parameter(Parameter& param);
    // Read-only use of a parameter; only valid on a non-recording tape.
    Var parameter(const Parameter& param);

    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_[v.id()].value; }
    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    // Empty when no gradient reached the node.
    const std::vector<double>& grad(Var v) const { return nodes_[v.id()].grad; }

    std::size_t size() const { return nodes_.size(); }
    bool recording() const { return record_; }
    bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

    // For primitive implementations: append a result computed from `inputs`.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
    Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
    // Gradient buffer of a node, zero-initialised on first access.
    std::vector<double>& grad_buffer(std::size_t id);

private:
    struct Node {
        Tensor value;
        std::vector<double> grad;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> param_nodes_;
    bool record_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

// ---- primitives -----------------------------------------------------------

// [m x k] . [k x n]
Var matmul(Var a, Var b);
// [m x k] . [n x k]^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
// x[..., n] + bias[n] broadcast over rows.
Var add_bias(Var x, Var bias);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
// Sum of all entries as a rank-0 tensor.
Var sum(Var x);
Var reshape(Var x, Shape shape);

// Exact form x * Phi(x).
Var gelu(Var x);
double gelu_value(double x);

// Row softmax over the last dimension. -inf entries get probability 0;
// a row with every entry -inf is rejected.
Var softmax_rows(Var x);

inline constexpr double kLayerNormEps = 1e-5;
Var layernorm(Var x, Var gain, Var bias, double eps = kLayerNormEps);

// Row lookup: out[i] = table[ids[i]].
Var embedding(Var table, std::span<const int> ids);

inline constexpr int kIgnoreTarget = -1;
// Mean negative log-likelihood over rows whose target is not kIgnoreTarget.
Var cross_entropy(Var logits, std::span<const int> targets);

// One attention head under a causal mask. q, k, v are [batch*seq x width]
// projections; the head reads columns [offset, offset + head_dim) and returns
// softmax(q_h k_h^T / sqrt(head_dim)) v_h as [batch*seq x head_dim].
Var causal_attention_head(Var q, Var k, Var v, std::size_t batch, std::size_t seq,
                          std::size_t offset, std::size_t head_dim);

Var slice_rows(Var x, std::size_t start, std::size_t count);
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);

} // namespace apollo::ad
