#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ivanet/tape.hpp"

namespace ivanet {

/// Builds a scalar loss on `tape` from leaves already registered on it.
using LossBuilder = std::function<Tensor(Tape& tape, std::span<const Tensor> leaves)>;

/// Reverse-mode gradients of `builder` at `leaves`, one tensor per leaf.
std::vector<Tensor> analytic_gradients(const LossBuilder& builder, std::span<const Tensor> leaves);

/// Central-difference gradients, perturbing one coordinate at a time by +-eps.
std::vector<Tensor> numeric_gradients(const LossBuilder& builder, std::span<const Tensor> leaves, double eps);

/// max over coordinates of |a - n| / max(1, |a|, |n|).
double max_relative_error(std::span<const Tensor> analytic, std::span<const Tensor> numeric);

/// Compares analytic against central-difference gradients for every leaf
/// coordinate and returns the worst relative error.
double grad_check(const LossBuilder& builder, std::span<const Tensor> leaves, double eps = 1e-5);

}  // namespace ivanet
