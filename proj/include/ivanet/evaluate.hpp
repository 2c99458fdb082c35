#pragma once

#include <functional>

#include "ivanet/dataset.hpp"
#include "ivanet/metrics.hpp"
#include "ivanet/model.hpp"

namespace ivanet {

/// Produces one prediction per sample; masks at input resolution.
using Predictor = std::function<std::vector<Prediction>(std::span<const GroundTruthSample* const>)>;

Predictor model_predictor(const ParamMap& params, const ModelConfig& cfg, Mode mode);

struct EvalOptions {
    bool detection = true;
    bool segmentation = true;
    double iou_threshold = 0.5;
    std::size_t batch_size = 16;
};

/// Per-class AP (classes 1..C-1) and per-class IoU (0..C-1) over a dataset.
EvalReport evaluate(std::span<const GroundTruthSample> samples, std::size_t num_classes, const Predictor& predictor,
                    const EvalOptions& opts = {});

}  // namespace ivanet
