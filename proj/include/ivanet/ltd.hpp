#pragma once

#include <optional>

#include "ivanet/backbone.hpp"

namespace ivanet {

struct LtdConfig {
    /// Channel width D shared by every refined level.
    std::size_t out_channels = 64;
    std::size_t fuse_kernel = 3;

    void validate() const;
};

struct FeaturePyramid {
    std::vector<Tensor> levels;
    std::vector<std::size_t> strides;
};

/// Parameters for local top-down fusion (`ltd.` prefix) over a backbone with
/// the given level widths.
void init_ltd(ParamMap& params, const std::vector<std::size_t>& level_channels, const LtdConfig& cfg,
              SplitMix64& rng);

/// Per-level 1x1 projections used when fusion is ablated (`noltd.` prefix).
void init_flat_projection(ParamMap& params, const std::vector<std::size_t>& level_channels, const LtdConfig& cfg,
                          SplitMix64& rng);

/// Fuses `lower` with its successors upsampled to its size:
/// concat -> kxk conv -> relu -> 1x1 conv to D. `succ2` may be absent for the
/// second-from-top level. `prefix` selects the parameter pair, e.g. "ltd.l0".
Tensor ltd_fuse(Tape& tape, const Tensor& lower, const Tensor& succ1, const std::optional<Tensor>& succ2,
                const ParamMap& params, const std::string& prefix, const LtdConfig& cfg);

/// Refined pyramid: level l fuses bottom-up levels l, l+1, l+2 only; the top
/// level is projected to D by 1x1 conv + relu.
FeaturePyramid build_feature_pyramid(Tape& tape, const BottomUpPyramid& bottom_up, const ParamMap& params,
                                     const LtdConfig& cfg);

/// Ablation baseline: every level projected independently to D channels.
FeaturePyramid build_flat_pyramid(Tape& tape, const BottomUpPyramid& bottom_up, const ParamMap& params,
                                  const LtdConfig& cfg);

}  // namespace ivanet
