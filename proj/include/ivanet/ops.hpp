#pragma once

#include <span>

#include "ivanet/tape.hpp"
#include "ivanet/tensor.hpp"

namespace ivanet {

struct Conv2dOptions {
    std::size_t stride = 1;
    std::size_t padding = 0;
};

/// Cross-correlation of `input` [N,C,H,W] with `weight` [K,C,kh,kw] plus a
/// per-channel `bias` [K]. An empty bias tensor means no bias.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, Conv2dOptions opts = {});

/// Bilinear resize with half-pixel centers:
/// src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1].
Tensor bilinear_upsample(Tape& tape, const Tensor& input, std::size_t out_h, std::size_t out_w);

Tensor relu(Tape& tape, const Tensor& input);

/// Concatenates NCHW tensors along the channel axis, in argument order.
Tensor concat_channels(Tape& tape, std::span<const Tensor> inputs);

/// Softmax over the last axis, max-subtracted.
Tensor softmax(Tape& tape, const Tensor& logits);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, double factor);
/// Natural log; inputs must be positive.
Tensor log(Tape& tape, const Tensor& x);
/// Sum of all elements as a one-element tensor.
Tensor sum(Tape& tape, const Tensor& x);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

/// Rearranges per-level head maps [N, A*K, H, W] into rows [N, R, K] where
/// rows run level-major, then row-major over cells, then anchor index. The
/// channel of anchor a, component k is a*K + k.
Tensor anchor_rows(Tape& tape, std::span<const Tensor> levels, std::size_t row_width);

/// sum_r weight[r] * -log softmax(logits[r])[target[r]] for logits [R,K].
/// Rows with zero weight contribute nothing and receive no gradient.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> targets,
                             std::span<const double> weights);

/// sum_r weight[r] * sum_k smoothL1(pred[r,k] - target[r,k]) for pred [R,K],
/// with smoothL1(d) = 0.5 d^2 for |d| < 1 and |d| - 0.5 otherwise.
Tensor smooth_l1(Tape& tape, const Tensor& pred, std::span<const double> targets, std::span<const double> weights);

}  // namespace ivanet
