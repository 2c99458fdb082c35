#pragma once

#include <map>
#include <string>

#include "ivanet/rng.hpp"
#include "ivanet/tape.hpp"

namespace ivanet {

/// Named parameter tensors, ordered by name. Forward functions read from a
/// ParamMap whose tensors are either plain values or tape leaves.
using ParamMap = std::map<std::string, Tensor>;

const Tensor& param(const ParamMap& params, const std::string& name);

/// Conv weight [out, in, k, k] drawn from N(0, 2 / fan_in) with fan_in = in*k*k.
Tensor he_normal(std::size_t out_ch, std::size_t in_ch, std::size_t kernel, SplitMix64& rng);

/// Adds `<prefix>.w` (He-initialized) and `<prefix>.b` (zeros).
void add_conv(ParamMap& params, const std::string& prefix, std::size_t out_ch, std::size_t in_ch, std::size_t kernel,
              SplitMix64& rng);

/// Final prediction layers: weights from N(0, 0.01^2), zero bias.
void add_prediction_conv(ParamMap& params, const std::string& prefix, std::size_t out_ch, std::size_t in_ch,
                         std::size_t kernel, SplitMix64& rng);

/// Registers every parameter as a leaf on `tape`.
ParamMap bind(Tape& tape, const ParamMap& params);

std::size_t parameter_count(const ParamMap& params);

/// Parameters whose name starts with `prefix`.
ParamMap with_prefix(const ParamMap& params, const std::string& prefix);

}  // namespace ivanet
