#pragma once

#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ivanet/tensor.hpp"

namespace ivanet {

class Tape;
class Gradients;
Gradients backward(const Tape& tape, const Tensor& loss);

/// Gradient buffers handed to a backward function, one per op input. Inputs
/// that are constants get an empty span and must be skipped.
using InputGrads = std::span<const std::span<double>>;
using BackwardFn = std::function<void(std::span<const double> grad_out, InputGrads grad_in)>;

/// Record of primitive applications in execution order. Confined to one
/// thread; independent tapes may live on different threads.
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    /// Registers a value as a differentiable leaf and returns it attached.
    Tensor leaf(const Tensor& value);

    /// Records `output = op(inputs)`. When every input is a constant nothing
    /// is recorded and the detached output is returned.
    Tensor record(const char* op, Tensor output, std::initializer_list<Tensor> inputs, BackwardFn backward);
    Tensor record(const char* op, Tensor output, std::span<const Tensor> inputs, BackwardFn backward);

    std::uint64_t id() const { return id_; }
    std::size_t size() const { return nodes_.size(); }
    /// Op name of node `index` ("leaf" for leaves).
    const std::string& op_name(std::size_t index) const { return nodes_.at(index).op; }
    /// Input node indices of node `index`; constants are omitted.
    std::vector<std::size_t> inputs_of(std::size_t index) const;
    bool owns(const Tensor& t) const { return t.node() && t.node()->tape_id == id_; }

private:
    friend class Gradients;
    friend Gradients backward(const Tape& tape, const Tensor& loss);

    struct Node {
        std::string op;
        Shape shape;
        std::vector<std::optional<std::size_t>> inputs;
        BackwardFn backward;
        bool is_leaf = false;
    };

    std::uint64_t id_;
    std::vector<Node> nodes_;
};

/// Gradients of a scalar loss with respect to every leaf on a tape.
class Gradients {
public:
    /// Gradient for a leaf tensor; zeros when the leaf did not reach the loss.
    const Tensor& of(const Tensor& leaf) const;
    const std::unordered_map<std::size_t, Tensor>& by_node() const { return grads_; }

private:
    friend Gradients backward(const Tape& tape, const Tensor& loss);
    std::uint64_t tape_id_ = 0;
    std::unordered_map<std::size_t, Tensor> grads_;
};

/// Reverse-mode sweep from a one-element loss. Throws ArgumentError for a
/// non-scalar loss or one that is not recorded on `tape`.
Gradients backward(const Tape& tape, const Tensor& loss);

}  // namespace ivanet
