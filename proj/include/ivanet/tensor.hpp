#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ivanet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Error taxonomy shared by every module.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Reference to a node recorded on a particular tape.
struct NodeRef {
    std::uint64_t tape_id = 0;
    std::size_t index = 0;
    friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

/// Dense row-major float64 array. Values are immutable once constructed, so
/// copies share storage. A tensor produced by a recorded op (or registered as
/// a leaf) carries a reference to its tape node; constants carry none.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t numel() const { return data_ ? data_->size() : 0; }
    bool empty() const { return numel() == 0; }

    std::span<const double> data() const {
        return data_ ? std::span<const double>(*data_) : std::span<const double>();
    }
    double operator[](std::size_t i) const { return (*data_)[i]; }
    /// Value of a one-element tensor.
    double item() const;
    /// Element at a 4-D index; convenience for NCHW tensors.
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

    const std::optional<NodeRef>& node() const { return node_; }
    bool is_constant() const { return !node_.has_value(); }

    /// Same values with no tape attachment.
    Tensor detached() const;
    Tensor with_node(NodeRef ref) const;
    /// Same storage viewed under a different shape with equal element count.
    Tensor reshaped_value(Shape shape) const;

    /// True when shapes and every value are bit-identical.
    bool bit_equal(const Tensor& other) const;

private:
    Shape shape_;
    std::shared_ptr<const std::vector<double>> data_;
    std::optional<NodeRef> node_;
};

}  // namespace ivanet
