#pragma once

#include <cstdint>
#include <vector>

#include "ivanet/params.hpp"

namespace ivanet {

struct BackboneConfig {
    std::size_t stem_channels = 32;
    std::vector<std::size_t> level_channels{48, 96, 160, 160};
    std::vector<std::size_t> blocks_per_level{1, 1, 1, 1};
    std::size_t input_size = 64;
    /// Stride of pyramid level 0; a power of two.
    std::size_t base_stride = 4;

    std::size_t num_levels() const { return level_channels.size(); }
    std::vector<std::size_t> strides() const;
    /// Side length of each (square) level.
    std::vector<std::size_t> level_sizes() const;
    /// Strides of the stem convolutions preceding level 0.
    std::vector<std::size_t> stem_strides() const;
    /// Throws ConfigError naming the first violated constraint.
    void validate() const;
};

struct BottomUpPyramid {
    std::vector<Tensor> levels;
    std::vector<std::size_t> strides;
};

/// He-initialized backbone parameters, all under the `backbone.` prefix.
ParamMap build_backbone(const BackboneConfig& config, std::uint64_t seed);
void init_backbone(ParamMap& params, const BackboneConfig& config, SplitMix64& rng);

/// Stem followed by residual stages; one pyramid level per stage. Each block
/// computes relu(conv3x3(relu(conv3x3(x))) + shortcut(x)) with a 1x1
/// projection shortcut whenever stride or width changes.
BottomUpPyramid forward_backbone(Tape& tape, const ParamMap& params, const BackboneConfig& config,
                                 const Tensor& image);

}  // namespace ivanet
