#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "ivanet/geometry.hpp"
#include "ivanet/ltd.hpp"

namespace ivanet {

struct AnchorConfig {
    /// Number of classes C including background class 0.
    std::size_t num_classes = 4;
    std::vector<double> aspect_ratios{1.0, 2.0, 0.5};
    /// One base scale per pyramid level, as a fraction of the image size.
    std::vector<double> scales{0.1, 0.25, 0.45, 0.7};
    /// Adds an aspect-ratio-1 anchor of scale sqrt(s_l * s_{l+1}) per cell,
    /// with s_L = 1 past the last level.
    bool extra_scale = true;
    std::array<double, 2> variances{0.1, 0.2};

    std::size_t anchors_per_cell() const { return aspect_ratios.size() + (extra_scale ? 1 : 0); }
    void validate(std::size_t levels) const;
};

struct DetectorConfig {
    double match_threshold = 0.5;
    double neg_ratio = 3.0;
    double score_threshold = 0.01;
    std::size_t top_k = 200;
    double nms_threshold = 0.45;
};

struct AnchorSet {
    std::vector<CenterBox> boxes;
    std::vector<std::size_t> level;
    /// Row-major cell index within the anchor's level.
    std::vector<std::size_t> cell;

    std::size_t size() const { return boxes.size(); }
};

/// Per-anchor assignment. label 0 is background; gt_index is -1 for
/// background anchors.
struct MatchAssignment {
    std::vector<int> labels;
    std::vector<int> gt_index;
    std::size_t positives = 0;

    std::size_t normalizer() const { return positives > 0 ? positives : 1; }
};

struct DetectionOutputs {
    /// Per level [N, C*A, H, W].
    std::vector<Tensor> scores;
    /// Per level [N, 4*A, H, W].
    std::vector<Tensor> offsets;
};

struct Detection {
    int class_id = 1;
    double score = 0;
    Box box;
};

void init_det_head(ParamMap& params, std::size_t levels, std::size_t channels, const AnchorConfig& cfg,
                   SplitMix64& rng);

/// One 3x3 classification conv (C*A channels) and one 3x3 regression conv
/// (4*A channels) per pyramid level.
DetectionOutputs bbox_predict(Tape& tape, const FeaturePyramid& pyramid, const ParamMap& params,
                              const AnchorConfig& cfg);

/// Anchors ordered level-major, then row-major over cells, then by anchor
/// index within the cell.
AnchorSet generate_anchors(std::span<const std::pair<std::size_t, std::size_t>> shapes, const AnchorConfig& cfg);

/// Each ground truth first claims its best-IoU anchor not already claimed
/// (in ground-truth order); every other anchor whose best IoU reaches
/// `iou_threshold` takes its argmax ground truth (lowest index on ties).
MatchAssignment match_anchors(const AnchorSet& anchors, std::span<const GtBox> gt, double iou_threshold);

std::array<double, 4> encode_box(const CenterBox& anchor, const Box& g, const std::array<double, 2>& variances);
Box decode_box(const CenterBox& anchor, std::span<const double> offsets, const std::array<double, 2>& variances);

/// Marks the floor(ratio * positives) highest-loss non-positive anchors;
/// ties go to the lower index.
std::vector<bool> hard_negative_mining(std::span<const double> per_anchor_loss, std::span<const bool> positives,
                                       double ratio);

struct DetectionLoss {
    Tensor loss;
    std::size_t normalizer = 1;
    double cls_sum = 0;
    double loc_sum = 0;
};

/// (L_cls + L_loc) / N over the batch, with N the total positive count
/// (at least 1). Negatives are mined per image.
DetectionLoss detection_loss(Tape& tape, const DetectionOutputs& outputs, std::span<const MatchAssignment> matches,
                             std::span<const std::vector<GtBox>> gt, const AnchorSet& anchors,
                             const AnchorConfig& anchor_cfg, double neg_ratio);

/// Score-thresholded, clipped detections for batch element `image`, at most
/// `top_k` of them, highest score first.
std::vector<Detection> decode_detections(const DetectionOutputs& outputs, std::size_t image, const AnchorSet& anchors,
                                         const AnchorConfig& cfg, double score_threshold, std::size_t top_k);

/// Greedy per-class suppression of detections overlapping a kept one with
/// IoU above `iou_threshold`. Output is sorted by score, ties in input order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold);

}  // namespace ivanet
