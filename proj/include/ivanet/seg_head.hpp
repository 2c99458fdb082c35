#pragma once

#include <cstdint>
#include <span>

#include "ivanet/ltd.hpp"

namespace ivanet {

struct PcmConfig {
    /// Common size every pyramid level is upsampled to.
    std::size_t target_h = 16;
    std::size_t target_w = 16;
    /// Width F of the post-concatenation 3x3 convolution.
    std::size_t mid_channels = 128;
};

/// Per-pixel class ids for a batch: ids[n][y][x] flattened, shape N x H x W.
struct SegTarget {
    std::size_t n = 0, h = 0, w = 0;
    std::vector<std::uint8_t> ids;
};

void init_seg_head(ParamMap& params, std::size_t levels, std::size_t channels, const PcmConfig& cfg,
                   std::size_t num_classes, SplitMix64& rng);

/// Upsample every level to the target size, concatenate, 3x3 conv + relu.
Tensor pcm_forward(Tape& tape, const FeaturePyramid& pyramid, const ParamMap& params, const PcmConfig& cfg);

/// Single 3x3 conv to C logits per pixel.
Tensor mask_logits(Tape& tape, const Tensor& features, const ParamMap& params, std::size_t num_classes);

/// Mean over all pixels of -log softmax(logits)[target]. Throws InputError
/// for a class id >= C.
Tensor segmentation_loss(Tape& tape, const Tensor& logits, const SegTarget& target);

/// Argmax class per pixel of logits [N,C,H,W] for batch element `image`.
std::vector<std::uint8_t> predict_mask(const Tensor& logits, std::size_t image);

/// Nearest-neighbour resize of a label map with half-pixel centers.
std::vector<std::uint8_t> resize_mask_nearest(std::span<const std::uint8_t> ids, std::size_t h, std::size_t w,
                                              std::size_t out_h, std::size_t out_w);

}  // namespace ivanet
