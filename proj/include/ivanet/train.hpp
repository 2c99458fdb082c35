#pragma once

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "ivanet/dataset.hpp"
#include "ivanet/model.hpp"

namespace ivanet {

struct TrainConfig {
    /// Weight W of the segmentation term.
    double w = 1.0;
    double lr0 = 1e-4;
    std::array<std::size_t, 2> decay_milestones{1500, 2400};
    std::size_t batch_size = 8;
    std::size_t max_steps = 3000;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    Mode mode = Mode::joint;
    bool augment = true;

    void validate() const;
};

struct AdamState {
    std::map<std::string, std::vector<double>> m, v;
    std::size_t t = 0;
};

/// det + W * seg in joint and no_ltd modes; the single active term otherwise.
Tensor total_loss(Tape& tape, const std::optional<Tensor>& det, const std::optional<Tensor>& seg, double w,
                  Mode mode);

/// Bias-corrected Adam update of every parameter that has a gradient.
void adam_step(ParamMap& params, const std::map<std::string, Tensor>& grads, AdamState& state, double lr,
               const TrainConfig& cfg);

/// lr0, lr0/10 from the first milestone, lr0/100 from the second.
double lr_at(std::size_t step, const TrainConfig& cfg);

struct AugmentOptions {
    double flip_probability = 0.5;
    double min_crop_scale = 0.6;
    double max_crop_scale = 1.0;
    int crop_attempts = 10;
};

/// Mirror image and mask columns; boxes map x -> 1 - x.
GroundTruthSample hflip(const GroundTruthSample& sample);

/// Square crop [x0, x0+side) x [y0, y0+side) resized back to the full size
/// (image bilinear, mask nearest). Boxes whose centers fall outside the crop
/// are dropped, the rest are clipped.
GroundTruthSample crop_resize(const GroundTruthSample& sample, std::size_t x0, std::size_t y0, std::size_t side);

/// Random horizontal flip followed by a random crop that keeps at least one
/// box (falling back to the full image after `crop_attempts` tries).
GroundTruthSample augment_sample(const GroundTruthSample& sample, SplitMix64& rng, const AugmentOptions& opts = {});

/// Stacks images into [N,3,S,S].
Tensor batch_images(std::span<const GroundTruthSample* const> samples);
/// Masks resized to the segmentation target size.
SegTarget batch_seg_target(std::span<const GroundTruthSample* const> samples, std::size_t h, std::size_t w);

struct LossRecord {
    std::size_t step = 0;
    double lr = 0;
    double det = 0;
    double seg = 0;
    double total = 0;
};

/// `step<TAB>lr<TAB>det_loss<TAB>seg_loss<TAB>total` per line.
std::string format_loss_log(std::span<const LossRecord> log);

struct TrainingDiverged : std::runtime_error {
    TrainingDiverged(std::size_t step, const std::string& what);
    std::size_t step;
};

struct TrainResult {
    ParamMap params;
    std::vector<LossRecord> log;
    std::size_t steps = 0;
};

using StepCallback = std::function<void(const LossRecord&)>;

/// Deterministic training given `cfg.seed`: parameter init, shuffling and
/// augmentation all derive from it.
TrainResult train_loop(std::span<const GroundTruthSample> dataset, const ModelConfig& model_cfg,
                       const TrainConfig& cfg, const StepCallback& on_step = {});

/// Gradients of one batch for `mode`, keyed by parameter name. Exposed for
/// consistency checks between training modes.
struct BatchLoss {
    double det = 0;
    double seg = 0;
    double total = 0;
    std::map<std::string, Tensor> grads;
};
BatchLoss batch_gradients(const ParamMap& params, const ModelConfig& model_cfg, const AnchorSet& anchors,
                          std::span<const GroundTruthSample* const> batch, Mode mode, double w);

}  // namespace ivanet
