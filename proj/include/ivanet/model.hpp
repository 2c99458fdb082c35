#pragma once

#include <optional>
#include <string_view>

#include "ivanet/backbone.hpp"
#include "ivanet/det_head.hpp"
#include "ivanet/ltd.hpp"
#include "ivanet/seg_head.hpp"

namespace ivanet {

/// Training/ablation variants. no_ltd keeps both heads but replaces local
/// top-down fusion with independent per-level projections.
enum class Mode { joint, det_only, seg_only, no_ltd };

std::string_view mode_name(Mode mode);
/// Accepts both `det_only` and `det-only` spellings.
Mode parse_mode(std::string_view text);

inline bool uses_detection(Mode m) { return m != Mode::seg_only; }
inline bool uses_segmentation(Mode m) { return m != Mode::det_only; }

struct ModelConfig {
    BackboneConfig backbone;
    LtdConfig ltd;
    AnchorConfig anchors;
    PcmConfig pcm;
    DetectorConfig detector;

    std::size_t num_classes() const { return anchors.num_classes; }
    std::vector<std::pair<std::size_t, std::size_t>> level_shapes() const;
    void validate() const;
};

/// Every parameter of every variant (backbone, ltd, noltd, det, seg); each
/// module draws from its own stream forked from `seed`.
ParamMap init_model(const ModelConfig& cfg, std::uint64_t seed);

struct ModelOutputs {
    FeaturePyramid pyramid;
    std::optional<DetectionOutputs> detection;
    /// [N, C, target_h, target_w]
    std::optional<Tensor> mask_logits;
};

ModelOutputs forward_model(Tape& tape, const ParamMap& params, const ModelConfig& cfg, const Tensor& images,
                           Mode mode);

struct Prediction {
    std::vector<Detection> detections;
    /// Label map at input resolution; empty when segmentation is disabled.
    std::vector<std::uint8_t> mask;
};

/// Inference on a batch [N,3,S,S]: decoded detections after NMS and argmax
/// masks resized to the input size.
std::vector<Prediction> predict(const ParamMap& params, const ModelConfig& cfg, const Tensor& images, Mode mode);

}  // namespace ivanet
