#include "ivanet/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ivanet {

namespace {

double evaluate(const LossBuilder& builder, std::span<const Tensor> leaves) {
    Tape tape;
    std::vector<Tensor> attached;
    attached.reserve(leaves.size());
    for (const Tensor& t : leaves) attached.push_back(tape.leaf(t.detached()));
    return builder(tape, attached).item();
}

}  // namespace

std::vector<Tensor> analytic_gradients(const LossBuilder& builder, std::span<const Tensor> leaves) {
    Tape tape;
    std::vector<Tensor> attached;
    attached.reserve(leaves.size());
    for (const Tensor& t : leaves) attached.push_back(tape.leaf(t.detached()));
    const Tensor loss = builder(tape, attached);
    std::vector<Tensor> out;
    if (loss.is_constant()) {
        for (const Tensor& t : leaves) out.push_back(Tensor::zeros(t.shape()));
        return out;
    }
    const Gradients grads = backward(tape, loss);
    for (const Tensor& t : attached) out.push_back(grads.of(t));
    return out;
}

std::vector<Tensor> numeric_gradients(const LossBuilder& builder, std::span<const Tensor> leaves, double eps) {
    if (!(eps > 0.0)) throw ArgumentError("numeric_gradients: eps must be positive");
    std::vector<Tensor> work(leaves.begin(), leaves.end());
    std::vector<Tensor> out;
    for (std::size_t l = 0; l < work.size(); ++l) {
        const Tensor original = work[l].detached();
        std::vector<double> values(original.data().begin(), original.data().end());
        std::vector<double> grad(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double x = values[i];
            values[i] = x + eps;
            work[l] = Tensor(original.shape(), values);
            const double up = evaluate(builder, work);
            values[i] = x - eps;
            work[l] = Tensor(original.shape(), values);
            const double down = evaluate(builder, work);
            values[i] = x;
            grad[i] = (up - down) / (2.0 * eps);
        }
        work[l] = original;
        out.emplace_back(original.shape(), std::move(grad));
    }
    return out;
}

double max_relative_error(std::span<const Tensor> analytic, std::span<const Tensor> numeric) {
    if (analytic.size() != numeric.size()) throw ArgumentError("max_relative_error: gradient count mismatch");
    double worst = 0.0;
    for (std::size_t l = 0; l < analytic.size(); ++l) {
        if (analytic[l].shape() != numeric[l].shape()) {
            throw ShapeError("max_relative_error: " + shape_str(analytic[l].shape()) + " vs " +
                             shape_str(numeric[l].shape()));
        }
        for (std::size_t i = 0; i < analytic[l].numel(); ++i) {
            const double a = analytic[l][i], n = numeric[l][i];
            const double denom = std::max({1.0, std::abs(a), std::abs(n)});
            worst = std::max(worst, std::abs(a - n) / denom);
        }
    }
    return worst;
}

double grad_check(const LossBuilder& builder, std::span<const Tensor> leaves, double eps) {
    const auto analytic = analytic_gradients(builder, leaves);
    const auto numeric = numeric_gradients(builder, leaves, eps);
    return max_relative_error(analytic, numeric);
}

}  // namespace ivanet
