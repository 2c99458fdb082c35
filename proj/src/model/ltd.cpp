#include "ivanet/ltd.hpp"

#include "ivanet/ops.hpp"

namespace ivanet {

namespace {

std::string level_prefix(const char* root, std::size_t l) { return std::string(root) + ".l" + std::to_string(l); }

void require_half(const Tensor& lower, const Tensor& upper, std::size_t factor, const char* name) {
    if (upper.rank() != 4 || upper.dim(0) != lower.dim(0) || upper.dim(2) * factor != lower.dim(2) ||
        upper.dim(3) * factor != lower.dim(3)) {
        throw ShapeError(std::string("ltd_fuse: ") + name + " " + shape_str(upper.shape()) + " is not 1/" +
                         std::to_string(factor) + " the size of " + shape_str(lower.shape()));
    }
}

}  // namespace

void LtdConfig::validate() const {
    if (out_channels == 0) throw ConfigError("ltd: out_channels must be positive");
    if (fuse_kernel == 0 || fuse_kernel % 2 == 0) throw ConfigError("ltd: fuse_kernel must be odd");
}

void init_ltd(ParamMap& params, const std::vector<std::size_t>& ch, const LtdConfig& cfg, SplitMix64& rng) {
    cfg.validate();
    const std::size_t levels = ch.size();
    if (levels < 3) throw ConfigError("ltd: at least 3 pyramid levels are required");
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        std::size_t in = ch[l] + ch[l + 1];
        if (l + 2 < levels) in += ch[l + 2];
        add_conv(params, level_prefix("ltd", l) + ".fuse", cfg.out_channels, in, cfg.fuse_kernel, rng);
        add_conv(params, level_prefix("ltd", l) + ".proj", cfg.out_channels, cfg.out_channels, 1, rng);
    }
    add_conv(params, level_prefix("ltd", levels - 1) + ".proj", cfg.out_channels, ch[levels - 1], 1, rng);
}

void init_flat_projection(ParamMap& params, const std::vector<std::size_t>& ch, const LtdConfig& cfg,
                          SplitMix64& rng) {
    cfg.validate();
    for (std::size_t l = 0; l < ch.size(); ++l) {
        add_conv(params, level_prefix("noltd", l) + ".proj", cfg.out_channels, ch[l], 1, rng);
    }
}

Tensor ltd_fuse(Tape& tape, const Tensor& lower, const Tensor& succ1, const std::optional<Tensor>& succ2,
                const ParamMap& params, const std::string& prefix, const LtdConfig& cfg) {
    if (lower.rank() != 4) throw ShapeError("ltd_fuse: lower must be NCHW, got " + shape_str(lower.shape()));
    require_half(lower, succ1, 2, "succ1");
    if (succ2) require_half(lower, *succ2, 4, "succ2");
    const std::size_t h = lower.dim(2), w = lower.dim(3);

    std::vector<Tensor> parts{lower, bilinear_upsample(tape, succ1, h, w)};
    if (succ2) parts.push_back(bilinear_upsample(tape, *succ2, h, w));
    const Tensor cat = concat_channels(tape, parts);
    const Tensor fused = relu(tape, conv2d(tape, cat, param(params, prefix + ".fuse.w"), param(params, prefix + ".fuse.b"),
                                           {1, cfg.fuse_kernel / 2}));
    return conv2d(tape, fused, param(params, prefix + ".proj.w"), param(params, prefix + ".proj.b"));
}

FeaturePyramid build_feature_pyramid(Tape& tape, const BottomUpPyramid& bu, const ParamMap& params,
                                     const LtdConfig& cfg) {
    const std::size_t levels = bu.levels.size();
    if (levels < 3) throw ConfigError("ltd: at least 3 pyramid levels are required, got " + std::to_string(levels));
    FeaturePyramid out;
    out.strides = bu.strides;
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        std::optional<Tensor> succ2;
        if (l + 2 < levels) succ2 = bu.levels[l + 2];
        out.levels.push_back(ltd_fuse(tape, bu.levels[l], bu.levels[l + 1], succ2, params, level_prefix("ltd", l), cfg));
    }
    const std::string top = level_prefix("ltd", levels - 1);
    out.levels.push_back(
        relu(tape, conv2d(tape, bu.levels.back(), param(params, top + ".proj.w"), param(params, top + ".proj.b"))));
    return out;
}

FeaturePyramid build_flat_pyramid(Tape& tape, const BottomUpPyramid& bu, const ParamMap& params, const LtdConfig&) {
    FeaturePyramid out;
    out.strides = bu.strides;
    for (std::size_t l = 0; l < bu.levels.size(); ++l) {
        const std::string p = level_prefix("noltd", l);
        out.levels.push_back(
            relu(tape, conv2d(tape, bu.levels[l], param(params, p + ".proj.w"), param(params, p + ".proj.b"))));
    }
    return out;
}

}  // namespace ivanet
