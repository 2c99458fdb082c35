#include "ivanet/tensor.hpp"

#include <cstring>
#include <sstream>

namespace ivanet {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::make_shared<const std::vector<double>>(std::move(data))) {
    for (std::size_t d : shape_) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
    }
    if (shape_numel(shape_) != data_->size()) {
        throw ShapeError("shape " + shape_str(shape_) + " does not match " + std::to_string(data_->size()) +
                         " values");
    }
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return (*data_)[0];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return (*data_)[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

Tensor Tensor::detached() const {
    Tensor t = *this;
    t.node_.reset();
    return t;
}

Tensor Tensor::with_node(NodeRef ref) const {
    Tensor t = *this;
    t.node_ = ref;
    return t;
}

Tensor Tensor::reshaped_value(Shape shape) const {
    if (shape_numel(shape) != numel()) {
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

bool Tensor::bit_equal(const Tensor& other) const {
    if (shape_ != other.shape_) return false;
    if (numel() == 0) return other.numel() == 0;
    return std::memcmp(data_->data(), other.data_->data(), numel() * sizeof(double)) == 0;
}

}  // namespace ivanet
