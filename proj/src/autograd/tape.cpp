#include "ivanet/tape.hpp"

#include <atomic>

namespace ivanet {

namespace {
std::uint64_t next_tape_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}
}  // namespace

Tape::Tape() : id_(next_tape_id()) {}

Tensor Tape::leaf(const Tensor& value) {
    if (value.node()) throw ArgumentError("leaf() expects a constant tensor");
    Node node;
    node.op = "leaf";
    node.shape = value.shape();
    node.is_leaf = true;
    nodes_.push_back(std::move(node));
    return value.with_node({id_, nodes_.size() - 1});
}

Tensor Tape::record(const char* op, Tensor output, std::initializer_list<Tensor> inputs, BackwardFn backward) {
    return record(op, std::move(output), std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(backward));
}

Tensor Tape::record(const char* op, Tensor output, std::span<const Tensor> inputs, BackwardFn backward) {
    Node node;
    bool any = false;
    node.inputs.reserve(inputs.size());
    for (const Tensor& in : inputs) {
        if (!in.node()) {
            node.inputs.emplace_back();
            continue;
        }
        if (in.node()->tape_id != id_) {
            throw ArgumentError(std::string(op) + ": input recorded on a different tape");
        }
        node.inputs.emplace_back(in.node()->index);
        any = true;
    }
    if (!any) return output.detached();
    node.op = op;
    node.shape = output.shape();
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return output.detached().with_node({id_, nodes_.size() - 1});
}

std::vector<std::size_t> Tape::inputs_of(std::size_t index) const {
    std::vector<std::size_t> out;
    for (const auto& in : nodes_.at(index).inputs) {
        if (in) out.push_back(*in);
    }
    return out;
}

const Tensor& Gradients::of(const Tensor& leaf) const {
    if (!leaf.node() || leaf.node()->tape_id != tape_id_) {
        throw ArgumentError("gradient requested for a tensor that is not a leaf of this tape");
    }
    auto it = grads_.find(leaf.node()->index);
    if (it == grads_.end()) throw ArgumentError("gradient requested for a non-leaf node");
    return it->second;
}

Gradients backward(const Tape& tape, const Tensor& loss) {
    if (loss.numel() != 1) throw ArgumentError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
    if (!tape.owns(loss)) throw ArgumentError("backward() loss is not recorded on this tape");

    const auto& nodes = tape.nodes_;
    std::vector<std::vector<double>> grads(nodes.size());
    grads[loss.node()->index].assign(1, 1.0);

    std::vector<std::span<double>> in_spans;
    for (std::size_t i = loss.node()->index + 1; i-- > 0;) {
        const auto& node = nodes[i];
        if (node.is_leaf || grads[i].empty()) continue;
        in_spans.clear();
        for (const auto& in : node.inputs) {
            if (!in) {
                in_spans.emplace_back();
                continue;
            }
            auto& g = grads[*in];
            if (g.empty()) g.assign(shape_numel(nodes[*in].shape), 0.0);
            in_spans.emplace_back(g);
        }
        node.backward(grads[i], in_spans);
        // Interior gradients are no longer needed once propagated.
        std::vector<double>().swap(grads[i]);
    }

    Gradients out;
    out.tape_id_ = tape.id();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i].is_leaf) continue;
        if (grads[i].empty()) {
            out.grads_.emplace(i, Tensor::zeros(nodes[i].shape));
        } else {
            out.grads_.emplace(i, Tensor(nodes[i].shape, std::move(grads[i])));
        }
    }
    return out;
}

}  // namespace ivanet
