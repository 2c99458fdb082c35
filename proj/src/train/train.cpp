#include "ivanet/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "ivanet/ops.hpp"

namespace ivanet {

void TrainConfig::validate() const {
    if (!(decay_milestones[0] < decay_milestones[1])) throw ConfigError("train: milestones must be strictly increasing");
    if (!(decay_milestones[1] < max_steps)) throw ConfigError("train: milestones must precede max_steps");
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (!(lr0 >= 0.0)) throw ConfigError("train: lr0 must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train: betas must lie in [0,1)");
    if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be positive");
    if (!(w >= 0.0)) throw ConfigError("train: w must be non-negative");
}

Tensor total_loss(Tape& tape, const std::optional<Tensor>& det, const std::optional<Tensor>& seg, double w,
                  Mode mode) {
    switch (mode) {
        case Mode::det_only:
            if (!det) throw ArgumentError("total_loss: det_only mode needs a detection loss");
            return *det;
        case Mode::seg_only:
            if (!seg) throw ArgumentError("total_loss: seg_only mode needs a segmentation loss");
            return *seg;
        case Mode::joint:
        case Mode::no_ltd:
            if (!det || !seg) throw ArgumentError("total_loss: joint objective needs both losses");
            return add(tape, *det, scale(tape, *seg, w));
    }
    throw ArgumentError("total_loss: unknown mode");
}

void adam_step(ParamMap& params, const std::map<std::string, Tensor>& grads, AdamState& state, double lr,
               const TrainConfig& cfg) {
    for (const auto& [name, g] : grads) {
        auto it = params.find(name);
        if (it == params.end()) throw ArgumentError("adam_step: gradient for unknown parameter '" + name + "'");
        if (it->second.shape() != g.shape()) {
            throw ShapeError("adam_step: parameter " + name + " " + shape_str(it->second.shape()) + " vs gradient " +
                             shape_str(g.shape()));
        }
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (const auto& [name, g] : grads) {
        Tensor& p = params.at(name);
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) {
            m.assign(g.numel(), 0.0);
            v.assign(g.numel(), 0.0);
        }
        std::vector<double> next(p.data().begin(), p.data().end());
        for (std::size_t i = 0; i < next.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            next[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
        p = Tensor(p.shape(), std::move(next));
    }
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
    if (step < cfg.decay_milestones[0]) return cfg.lr0;
    if (step < cfg.decay_milestones[1]) return cfg.lr0 / 10.0;
    return cfg.lr0 / 100.0;
}

GroundTruthSample hflip(const GroundTruthSample& s) {
    const std::size_t size = s.size();
    std::vector<double> img(s.image.numel());
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < size; ++y) {
            for (std::size_t x = 0; x < size; ++x) {
                img[(c * size + y) * size + x] = s.image[(c * size + y) * size + (size - 1 - x)];
            }
        }
    }
    GroundTruthSample out;
    out.image = Tensor(s.image.shape(), std::move(img));
    out.mask.resize(s.mask.size());
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) out.mask[y * size + x] = s.mask[y * size + (size - 1 - x)];
    }
    for (const GtBox& b : s.boxes) out.boxes.push_back({b.class_id, {1.0 - b.box.xmax, b.box.ymin, 1.0 - b.box.xmin, b.box.ymax}});
    return out;
}

GroundTruthSample crop_resize(const GroundTruthSample& s, std::size_t x0, std::size_t y0, std::size_t side) {
    const std::size_t size = s.size();
    if (side == 0 || x0 + side > size || y0 + side > size) throw ArgumentError("crop_resize: crop outside the image");

    std::vector<double> crop(3 * side * side);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < side; ++y) {
            for (std::size_t x = 0; x < side; ++x) {
                crop[(c * side + y) * side + x] = s.image[(c * size + y0 + y) * size + x0 + x];
            }
        }
    }
    Tape scratch;
    const Tensor resized = bilinear_upsample(scratch, Tensor({1, 3, side, side}, std::move(crop)), size, size);

    std::vector<std::uint8_t> mask_crop(side * side);
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) mask_crop[y * side + x] = s.mask[(y0 + y) * size + x0 + x];
    }

    GroundTruthSample out;
    out.image = resized.reshaped_value({3, size, size});
    out.mask = resize_mask_nearest(mask_crop, side, side, size, size);
    const double fs = static_cast<double>(size);
    const double left = static_cast<double>(x0) / fs, top = static_cast<double>(y0) / fs;
    const double extent = static_cast<double>(side) / fs;
    for (const GtBox& b : s.boxes) {
        const double cx = (b.box.xmin + b.box.xmax) / 2, cy = (b.box.ymin + b.box.ymax) / 2;
        if (cx < left || cx >= left + extent || cy < top || cy >= top + extent) continue;
        auto map = [&](double v, double origin) { return std::clamp((v - origin) / extent, 0.0, 1.0); };
        out.boxes.push_back({b.class_id, {map(b.box.xmin, left), map(b.box.ymin, top), map(b.box.xmax, left),
                                          map(b.box.ymax, top)}});
    }
    return out;
}

GroundTruthSample augment_sample(const GroundTruthSample& sample, SplitMix64& rng, const AugmentOptions& opts) {
    GroundTruthSample flipped = rng.bernoulli(opts.flip_probability) ? hflip(sample) : sample;
    const std::size_t size = flipped.size();
    for (int attempt = 0; attempt < opts.crop_attempts; ++attempt) {
        const double scale = rng.uniform(opts.min_crop_scale, opts.max_crop_scale);
        const auto side = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::lround(scale * static_cast<double>(size))), 1, size);
        const auto x0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(size - side)));
        const auto y0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(size - side)));
        GroundTruthSample cropped = crop_resize(flipped, x0, y0, side);
        if (!cropped.boxes.empty() || flipped.boxes.empty()) return cropped;
    }
    return flipped;
}

Tensor batch_images(std::span<const GroundTruthSample* const> samples) {
    if (samples.empty()) throw ArgumentError("batch_images: empty batch");
    const std::size_t size = samples[0]->size();
    std::vector<double> data;
    data.reserve(samples.size() * 3 * size * size);
    for (const GroundTruthSample* s : samples) {
        if (s->size() != size) throw ShapeError("batch_images: mixed image sizes");
        data.insert(data.end(), s->image.data().begin(), s->image.data().end());
    }
    return Tensor({samples.size(), 3, size, size}, std::move(data));
}

SegTarget batch_seg_target(std::span<const GroundTruthSample* const> samples, std::size_t h, std::size_t w) {
    SegTarget t{samples.size(), h, w, {}};
    for (const GroundTruthSample* s : samples) {
        const auto m = resize_mask_nearest(s->mask, s->size(), s->size(), h, w);
        t.ids.insert(t.ids.end(), m.begin(), m.end());
    }
    return t;
}

std::string format_loss_log(std::span<const LossRecord> log) {
    std::string out;
    char buf[160];
    for (const LossRecord& r : log) {
        std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\t%.17g\n", r.step, r.lr, r.det, r.seg, r.total);
        out += buf;
    }
    return out;
}

TrainingDiverged::TrainingDiverged(std::size_t s, const std::string& what)
    : std::runtime_error("training diverged at step " + std::to_string(s) + ": " + what), step(s) {}

BatchLoss batch_gradients(const ParamMap& params, const ModelConfig& model_cfg, const AnchorSet& anchors,
                          std::span<const GroundTruthSample* const> batch, Mode mode, double w) {
    Tape tape;
    const ParamMap bound = bind(tape, params);
    const Tensor images = batch_images(batch);
    const ModelOutputs out = forward_model(tape, bound, model_cfg, images, mode);

    BatchLoss result;
    std::optional<Tensor> det, seg;
    if (out.detection) {
        std::vector<MatchAssignment> matches;
        std::vector<std::vector<GtBox>> gts;
        for (const GroundTruthSample* s : batch) {
            matches.push_back(match_anchors(anchors, s->boxes, model_cfg.detector.match_threshold));
            gts.push_back(s->boxes);
        }
        det = detection_loss(tape, *out.detection, matches, gts, anchors, model_cfg.anchors,
                             model_cfg.detector.neg_ratio)
                  .loss;
        result.det = det->item();
    }
    if (out.mask_logits) {
        seg = segmentation_loss(tape, *out.mask_logits,
                                batch_seg_target(batch, model_cfg.pcm.target_h, model_cfg.pcm.target_w));
        result.seg = seg->item();
    }
    const Tensor total = total_loss(tape, det, seg, w, mode);
    result.total = total.item();
    if (!std::isfinite(result.total)) return result;
    const Gradients grads = backward(tape, total);
    for (const auto& [name, leaf] : bound) result.grads.emplace(name, grads.of(leaf));
    return result;
}

TrainResult train_loop(std::span<const GroundTruthSample> dataset, const ModelConfig& model_cfg,
                       const TrainConfig& cfg, const StepCallback& on_step) {
    if (dataset.empty()) throw ArgumentError("train_loop: empty dataset");
    cfg.validate();
    model_cfg.validate();

    TrainResult result;
    result.params = init_model(model_cfg, cfg.seed);
    const AnchorSet anchors = generate_anchors(model_cfg.level_shapes(), model_cfg.anchors);
    AdamState adam;

    SplitMix64 data_rng(cfg.seed ^ 0xD1B54A32D192ED03ULL);
    SplitMix64 shuffle_rng = data_rng.fork();
    SplitMix64 augment_rng = data_rng.fork();
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    std::vector<GroundTruthSample> augmented(cfg.batch_size);
    std::vector<const GroundTruthSample*> batch(cfg.batch_size);
    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                for (std::size_t i = order.size(); i-- > 1;) {
                    std::swap(order[i], order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
                }
                cursor = 0;
            }
            const GroundTruthSample& s = dataset[order[cursor++]];
            if (cfg.augment) {
                augmented[b] = augment_sample(s, augment_rng);
                batch[b] = &augmented[b];
            } else {
                batch[b] = &s;
            }
        }

        BatchLoss bl = batch_gradients(result.params, model_cfg, anchors, batch, cfg.mode, cfg.w);
        if (!std::isfinite(bl.total)) {
            throw TrainingDiverged(step, "loss is " + std::to_string(bl.total) + " (det " + std::to_string(bl.det) +
                                             ", seg " + std::to_string(bl.seg) + ")");
        }
        const double lr = lr_at(step, cfg);
        adam_step(result.params, bl.grads, adam, lr, cfg);
        result.log.push_back({step, lr, bl.det, bl.seg, bl.total});
        result.steps = step + 1;
        if (on_step) on_step(result.log.back());
    }
    return result;
}

}  // namespace ivanet
