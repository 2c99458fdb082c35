#include "ivanet/backbone.hpp"

#include <bit>
#include <string>

#include "ivanet/ops.hpp"

namespace ivanet {

namespace {

std::string block_prefix(std::size_t level, std::size_t block) {
    return "backbone.l" + std::to_string(level) + ".b" + std::to_string(block);
}

std::size_t block_stride(const BackboneConfig& cfg, std::size_t level, std::size_t block) {
    if (block > 0) return 1;
    if (level > 0) return 2;
    return cfg.base_stride >= 2 ? 2 : 1;
}

Tensor conv(Tape& tape, const ParamMap& p, const std::string& prefix, const Tensor& x, std::size_t stride,
            std::size_t padding) {
    return conv2d(tape, x, param(p, prefix + ".w"), param(p, prefix + ".b"), {stride, padding});
}

}  // namespace

std::vector<std::size_t> BackboneConfig::strides() const {
    std::vector<std::size_t> s;
    for (std::size_t l = 0; l < num_levels(); ++l) s.push_back(base_stride << l);
    return s;
}

std::vector<std::size_t> BackboneConfig::level_sizes() const {
    std::vector<std::size_t> s;
    for (std::size_t stride : strides()) s.push_back(input_size / stride);
    return s;
}

std::vector<std::size_t> BackboneConfig::stem_strides() const {
    const int log2 = std::countr_zero(base_stride);
    if (log2 <= 1) return {1};
    return std::vector<std::size_t>(static_cast<std::size_t>(log2 - 1), 2);
}

void BackboneConfig::validate() const {
    if (stem_channels == 0) throw ConfigError("backbone: stem_channels must be positive");
    if (level_channels.size() != blocks_per_level.size()) {
        throw ConfigError("backbone: level_channels and blocks_per_level differ in length");
    }
    if (level_channels.size() < 3) throw ConfigError("backbone: at least 3 pyramid levels are required");
    for (std::size_t c : level_channels) {
        if (c == 0) throw ConfigError("backbone: level_channels entries must be positive");
    }
    for (std::size_t b : blocks_per_level) {
        if (b == 0) throw ConfigError("backbone: blocks_per_level entries must be positive");
    }
    if (base_stride == 0 || !std::has_single_bit(base_stride)) {
        throw ConfigError("backbone: base_stride must be a power of two");
    }
    const std::size_t coarsest = base_stride << (num_levels() - 1);
    if (input_size == 0 || input_size % coarsest != 0) {
        throw ConfigError("backbone: input_size " + std::to_string(input_size) + " not divisible by " +
                          std::to_string(coarsest));
    }
}

void init_backbone(ParamMap& params, const BackboneConfig& cfg, SplitMix64& rng) {
    cfg.validate();
    const auto stem = cfg.stem_strides();
    std::size_t in_ch = 3;
    for (std::size_t i = 0; i < stem.size(); ++i) {
        add_conv(params, "backbone.stem" + std::to_string(i), cfg.stem_channels, in_ch, 3, rng);
        in_ch = cfg.stem_channels;
    }
    for (std::size_t l = 0; l < cfg.num_levels(); ++l) {
        const std::size_t out_ch = cfg.level_channels[l];
        for (std::size_t b = 0; b < cfg.blocks_per_level[l]; ++b) {
            const std::string prefix = block_prefix(l, b);
            add_conv(params, prefix + ".conv1", out_ch, in_ch, 3, rng);
            add_conv(params, prefix + ".conv2", out_ch, out_ch, 3, rng);
            if (in_ch != out_ch || block_stride(cfg, l, b) != 1) add_conv(params, prefix + ".proj", out_ch, in_ch, 1, rng);
            in_ch = out_ch;
        }
    }
}

ParamMap build_backbone(const BackboneConfig& config, std::uint64_t seed) {
    ParamMap params;
    SplitMix64 rng(seed);
    init_backbone(params, config, rng);
    return params;
}

BottomUpPyramid forward_backbone(Tape& tape, const ParamMap& params, const BackboneConfig& cfg, const Tensor& image) {
    if (image.rank() != 4 || image.dim(1) != 3 || image.dim(2) != cfg.input_size || image.dim(3) != cfg.input_size) {
        throw ShapeError("backbone: expected image [N,3," + std::to_string(cfg.input_size) + "," +
                         std::to_string(cfg.input_size) + "], got " + shape_str(image.shape()));
    }
    // inputs in [0,1] are centred before the stem
    Tensor x = add(tape, image, Tensor(image.shape(), std::vector<double>(image.numel(), -0.5)));
    const auto stem = cfg.stem_strides();
    for (std::size_t i = 0; i < stem.size(); ++i) {
        x = relu(tape, conv(tape, params, "backbone.stem" + std::to_string(i), x, stem[i], 1));
    }

    BottomUpPyramid out;
    out.strides = cfg.strides();
    for (std::size_t l = 0; l < cfg.num_levels(); ++l) {
        for (std::size_t b = 0; b < cfg.blocks_per_level[l]; ++b) {
            const std::string prefix = block_prefix(l, b);
            const std::size_t stride = block_stride(cfg, l, b);
            const Tensor h = relu(tape, conv(tape, params, prefix + ".conv1", x, stride, 1));
            const Tensor f = conv(tape, params, prefix + ".conv2", h, 1, 1);
            const Tensor shortcut =
                params.contains(prefix + ".proj.w") ? conv(tape, params, prefix + ".proj", x, stride, 0) : x;
            x = relu(tape, add(tape, f, shortcut));
        }
        out.levels.push_back(x);
    }
    return out;
}

}  // namespace ivanet
