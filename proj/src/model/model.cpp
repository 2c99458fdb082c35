#include "ivanet/model.hpp"

namespace ivanet {

std::string_view mode_name(Mode mode) {
    switch (mode) {
        case Mode::joint: return "joint";
        case Mode::det_only: return "det_only";
        case Mode::seg_only: return "seg_only";
        case Mode::no_ltd: return "no_ltd";
    }
    return "joint";
}

Mode parse_mode(std::string_view text) {
    std::string s(text);
    for (char& c : s) {
        if (c == '-') c = '_';
    }
    if (s == "joint") return Mode::joint;
    if (s == "det_only") return Mode::det_only;
    if (s == "seg_only") return Mode::seg_only;
    if (s == "no_ltd") return Mode::no_ltd;
    throw ConfigError("unknown mode '" + std::string(text) + "' (expected joint, det-only, seg-only or no-ltd)");
}

std::vector<std::pair<std::size_t, std::size_t>> ModelConfig::level_shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    for (std::size_t s : backbone.level_sizes()) shapes.emplace_back(s, s);
    return shapes;
}

void ModelConfig::validate() const {
    backbone.validate();
    ltd.validate();
    anchors.validate(backbone.num_levels());
    if (num_classes() > 255) throw ConfigError("model: at most 255 classes fit in 8-bit masks");
    const std::size_t finest = backbone.level_sizes().front();
    if (pcm.target_h < finest || pcm.target_w < finest) {
        throw ConfigError("pcm: target size must be at least the finest level size " + std::to_string(finest));
    }
    if (pcm.mid_channels == 0) throw ConfigError("pcm: mid_channels must be positive");
    if (!(detector.match_threshold > 0 && detector.match_threshold < 1)) {
        throw ConfigError("detector: match_threshold must lie in (0,1)");
    }
    if (!(detector.neg_ratio > 0)) throw ConfigError("detector: neg_ratio must be positive");
}

ParamMap init_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    SplitMix64 root(seed);
    SplitMix64 backbone_rng = root.fork(), ltd_rng = root.fork(), flat_rng = root.fork(), det_rng = root.fork(),
               seg_rng = root.fork();
    ParamMap params;
    init_backbone(params, cfg.backbone, backbone_rng);
    init_ltd(params, cfg.backbone.level_channels, cfg.ltd, ltd_rng);
    init_flat_projection(params, cfg.backbone.level_channels, cfg.ltd, flat_rng);
    init_det_head(params, cfg.backbone.num_levels(), cfg.ltd.out_channels, cfg.anchors, det_rng);
    init_seg_head(params, cfg.backbone.num_levels(), cfg.ltd.out_channels, cfg.pcm, cfg.num_classes(), seg_rng);
    return params;
}

ModelOutputs forward_model(Tape& tape, const ParamMap& params, const ModelConfig& cfg, const Tensor& images,
                           Mode mode) {
    const BottomUpPyramid bottom_up = forward_backbone(tape, params, cfg.backbone, images);
    ModelOutputs out;
    out.pyramid = mode == Mode::no_ltd ? build_flat_pyramid(tape, bottom_up, params, cfg.ltd)
                                       : build_feature_pyramid(tape, bottom_up, params, cfg.ltd);
    if (uses_detection(mode)) out.detection = bbox_predict(tape, out.pyramid, params, cfg.anchors);
    if (uses_segmentation(mode)) {
        const Tensor features = pcm_forward(tape, out.pyramid, params, cfg.pcm);
        out.mask_logits = mask_logits(tape, features, params, cfg.num_classes());
    }
    return out;
}

std::vector<Prediction> predict(const ParamMap& params, const ModelConfig& cfg, const Tensor& images, Mode mode) {
    Tape tape;
    const ModelOutputs out = forward_model(tape, params, cfg, images.detached(), mode);
    const AnchorSet anchors = generate_anchors(cfg.level_shapes(), cfg.anchors);
    const std::size_t s = cfg.backbone.input_size;
    std::vector<Prediction> preds(images.dim(0));
    for (std::size_t n = 0; n < preds.size(); ++n) {
        if (out.detection) {
            const auto raw = decode_detections(*out.detection, n, anchors, cfg.anchors, cfg.detector.score_threshold,
                                               cfg.detector.top_k);
            preds[n].detections = nms(raw, cfg.detector.nms_threshold);
        }
        if (out.mask_logits) {
            preds[n].mask = resize_mask_nearest(predict_mask(*out.mask_logits, n), cfg.pcm.target_h, cfg.pcm.target_w,
                                                s, s);
        }
    }
    return preds;
}

}  // namespace ivanet
