#include "ivanet/seg_head.hpp"

#include <algorithm>

#include "ivanet/ops.hpp"

namespace ivanet {

void init_seg_head(ParamMap& params, std::size_t levels, std::size_t channels, const PcmConfig& cfg,
                   std::size_t num_classes, SplitMix64& rng) {
    if (cfg.mid_channels == 0 || cfg.target_h == 0 || cfg.target_w == 0) {
        throw ConfigError("pcm: target size and mid_channels must be positive");
    }
    add_conv(params, "seg.pcm", cfg.mid_channels, levels * channels, 3, rng);
    add_prediction_conv(params, "seg.mask", num_classes, cfg.mid_channels, 3, rng);
}

Tensor pcm_forward(Tape& tape, const FeaturePyramid& pyramid, const ParamMap& params, const PcmConfig& cfg) {
    if (pyramid.levels.empty()) throw ArgumentError("pcm_forward: empty pyramid");
    std::vector<Tensor> resized;
    for (const Tensor& level : pyramid.levels) {
        if (level.dim(2) == cfg.target_h && level.dim(3) == cfg.target_w) {
            resized.push_back(level);
        } else {
            resized.push_back(bilinear_upsample(tape, level, cfg.target_h, cfg.target_w));
        }
    }
    const Tensor cat = concat_channels(tape, resized);
    return relu(tape, conv2d(tape, cat, param(params, "seg.pcm.w"), param(params, "seg.pcm.b"), {1, 1}));
}

Tensor mask_logits(Tape& tape, const Tensor& features, const ParamMap& params, std::size_t num_classes) {
    const Tensor& w = param(params, "seg.mask.w");
    if (w.dim(0) != num_classes) {
        throw ShapeError("mask_logits: parameters produce " + std::to_string(w.dim(0)) + " classes, expected " +
                         std::to_string(num_classes));
    }
    return conv2d(tape, features, w, param(params, "seg.mask.b"), {1, 1});
}

Tensor segmentation_loss(Tape& tape, const Tensor& logits, const SegTarget& target) {
    if (logits.rank() != 4 || logits.dim(0) != target.n || logits.dim(2) != target.h || logits.dim(3) != target.w ||
        target.ids.size() != target.n * target.h * target.w) {
        throw ShapeError("segmentation_loss: logits " + shape_str(logits.shape()) + " vs target " +
                         shape_str({target.n, target.h, target.w}));
    }
    const std::size_t c = logits.dim(1);
    for (std::uint8_t id : target.ids) {
        if (id >= c) throw InputError("segmentation_loss: class id " + std::to_string(id) + " >= " + std::to_string(c));
    }
    const Tensor rows = anchor_rows(tape, std::span<const Tensor>(&logits, 1), c);
    const std::vector<int> t(target.ids.begin(), target.ids.end());
    const std::vector<double> w(t.size(), 1.0);
    const Tensor total = softmax_cross_entropy(tape, rows, t, w);
    return scale(tape, total, 1.0 / static_cast<double>(t.size()));
}

std::vector<std::uint8_t> predict_mask(const Tensor& logits, std::size_t image) {
    const std::size_t c = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
    std::vector<std::uint8_t> out(plane);
    const double* base = logits.data().data() + image * c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < c; ++k) {
            if (base[k * plane + p] > base[best * plane + p]) best = k;
        }
        out[p] = static_cast<std::uint8_t>(best);
    }
    return out;
}

std::vector<std::uint8_t> resize_mask_nearest(std::span<const std::uint8_t> ids, std::size_t h, std::size_t w,
                                              std::size_t out_h, std::size_t out_w) {
    if (ids.size() != h * w) throw ShapeError("resize_mask_nearest: mask size does not match dimensions");
    std::vector<std::uint8_t> out(out_h * out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const std::size_t sy = std::min(h - 1, (2 * y + 1) * h / (2 * out_h));
        for (std::size_t x = 0; x < out_w; ++x) {
            const std::size_t sx = std::min(w - 1, (2 * x + 1) * w / (2 * out_w));
            out[y * out_w + x] = ids[sy * w + sx];
        }
    }
    return out;
}

}  // namespace ivanet
