#include "ivanet/gradient_suite.hpp"

#include <functional>

#include "ivanet/model.hpp"
#include "ivanet/ops.hpp"
#include "ivanet/train.hpp"

namespace ivanet {

Tensor random_tensor(const Shape& shape, SplitMix64& rng, double scale) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = scale * rng.uniform(-1.0, 1.0);
    return Tensor(shape, std::move(v));
}

namespace {

constexpr double kEps = 1e-5;

// Contracts a tensor with fixed random weights so every output element
// receives a distinct upstream gradient.
Tensor project(Tape& tape, const Tensor& out, std::uint64_t salt) {
    SplitMix64 rng(salt ^ out.numel());
    return sum(tape, mul(tape, out, random_tensor(out.shape(), rng)));
}

Tensor project_all(Tape& tape, std::span<const Tensor> outs, std::uint64_t salt) {
    Tensor total = project(tape, outs[0], salt);
    for (std::size_t i = 1; i < outs.size(); ++i) total = add(tape, total, project(tape, outs[i], salt + i));
    return total;
}

// Leaves are [extra inputs..., parameters in map order].
struct ParamLeaves {
    std::vector<std::string> names;
    std::vector<Tensor> leaves;
    std::size_t first_param = 0;

    ParamMap rebuild(std::span<const Tensor> ls) const {
        ParamMap p;
        for (std::size_t i = 0; i < names.size(); ++i) p.emplace(names[i], ls[first_param + i]);
        return p;
    }
};

ParamLeaves pack(std::vector<Tensor> inputs, const ParamMap& params) {
    ParamLeaves pl;
    pl.first_param = inputs.size();
    pl.leaves = std::move(inputs);
    for (const auto& [name, t] : params) {
        pl.names.push_back(name);
        pl.leaves.push_back(t);
    }
    return pl;
}

// Small ReLU networks start with a third of their units dead; biases are
// nudged positive so most units are active and away from the kink.
ParamMap jitter_biases(ParamMap params, SplitMix64& rng) {
    for (auto& [name, t] : params) {
        if (!name.ends_with(".b")) continue;
        std::vector<double> v(t.numel());
        for (double& x : v) x = rng.uniform(0.05, 0.3);
        t = Tensor(t.shape(), std::move(v));
    }
    return params;
}

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.backbone.stem_channels = 3;
    cfg.backbone.level_channels = {3, 4, 4};
    cfg.backbone.blocks_per_level = {1, 1, 1};
    cfg.backbone.input_size = 16;
    cfg.backbone.base_stride = 4;
    cfg.ltd.out_channels = 3;
    cfg.anchors.num_classes = 3;
    cfg.anchors.scales = {0.2, 0.4, 0.7};
    cfg.anchors.aspect_ratios = {1.0, 2.0};
    cfg.pcm = {4, 4, 3};
    return cfg;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed) {
    std::vector<GradCheckResult> results;
    SplitMix64 rng(seed);
    auto check = [&](std::string name, const LossBuilder& builder, std::vector<Tensor> leaves) {
        results.push_back({std::move(name), grad_check(builder, leaves, kEps)});
    };

    for (std::size_t stride : {1, 2}) {
        for (std::size_t pad : {0, 1}) {
            check("conv2d stride=" + std::to_string(stride) + " pad=" + std::to_string(pad),
                  [stride, pad](Tape& t, std::span<const Tensor> l) {
                      return project(t, conv2d(t, l[0], l[1], l[2], {stride, pad}), 1);
                  },
                  {random_tensor({2, 3, 7, 5}, rng), random_tensor({4, 3, 3, 3}, rng), random_tensor({4}, rng)});
        }
    }
    check("conv2d 1x1",
          [](Tape& t, std::span<const Tensor> l) { return project(t, conv2d(t, l[0], l[1], l[2]), 2); },
          {random_tensor({2, 3, 4, 4}, rng), random_tensor({5, 3, 1, 1}, rng), random_tensor({5}, rng)});
    check("bilinear_upsample",
          [](Tape& t, std::span<const Tensor> l) { return project(t, bilinear_upsample(t, l[0], 7, 5), 3); },
          {random_tensor({2, 2, 3, 2}, rng)});
    check("relu", [](Tape& t, std::span<const Tensor> l) { return project(t, relu(t, l[0]), 4); },
          {random_tensor({3, 4}, rng)});
    check("concat_channels",
          [](Tape& t, std::span<const Tensor> l) {
              const std::vector<Tensor> parts{l[0], l[1]};
              return project(t, concat_channels(t, parts), 5);
          },
          {random_tensor({2, 1, 3, 3}, rng), random_tensor({2, 2, 3, 3}, rng)});
    check("softmax", [](Tape& t, std::span<const Tensor> l) { return project(t, softmax(t, l[0]), 6); },
          {random_tensor({3, 5}, rng, 2.0)});
    check("elementwise add/mul/scale/log/reshape/sum",
          [](Tape& t, std::span<const Tensor> l) {
              const Tensor a = mul(t, l[0], l[1]);
              const Tensor b = add(t, scale(t, a, 0.7), log(t, l[2]));
              return project(t, reshape(t, b, {6, 2}), 7);
          },
          {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng),
           Tensor({3, 4}, {0.5, 1.2, 2.0, 0.8, 1.5, 0.9, 1.1, 0.3, 0.7, 1.9, 1.3, 0.6})});
    check("anchor_rows",
          [](Tape& t, std::span<const Tensor> l) { return project(t, anchor_rows(t, l, 3), 8); },
          {random_tensor({2, 6, 2, 2}, rng), random_tensor({2, 6, 1, 1}, rng)});
    {
        const std::vector<int> targets{0, 2, 1, 3};
        const std::vector<double> weights{1.0, 0.0, 2.0, 1.0};
        check("softmax_cross_entropy",
              [targets, weights](Tape& t, std::span<const Tensor> l) {
                  return softmax_cross_entropy(t, l[0], targets, weights);
              },
              {random_tensor({4, 4}, rng, 2.0)});
    }
    {
        const Tensor pred = random_tensor({3, 4}, rng, 2.0);
        std::vector<double> targets(12);
        for (double& v : targets) v = rng.uniform(-1.5, 1.5);
        const std::vector<double> weights{1.0, 0.0, 1.0};
        check("smooth_l1",
              [targets, weights](Tape& t, std::span<const Tensor> l) { return smooth_l1(t, l[0], targets, weights); },
              {pred});
    }
    check("conv->relu->softmax->cross-entropy",
          [](Tape& t, std::span<const Tensor> l) {
              const Tensor probs = softmax(t, relu(t, conv2d(t, l[0], l[1], l[2], {1, 1})));
              std::vector<double> onehot(probs.numel(), 0.0);
              for (std::size_t i = 0; i < onehot.size(); i += probs.shape().back()) onehot[i + (i / 7) % 5] = 1.0;
              return scale(t, sum(t, mul(t, Tensor(probs.shape(), onehot), log(t, probs))), -1.0);
          },
          {random_tensor({1, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng, 0.5)});

    const ModelConfig cfg = tiny_model();
    const ParamMap model_params = jitter_biases(init_model(cfg, seed), rng);
    const Tensor image = random_tensor({2, 3, 16, 16}, rng);

    {
        const ParamLeaves pl = pack({image}, with_prefix(model_params, "backbone."));
        check("backbone",
              [pl, cfg](Tape& t, std::span<const Tensor> l) {
                  const BottomUpPyramid p = forward_backbone(t, pl.rebuild(l), cfg.backbone, l[0]);
                  return project_all(t, p.levels, 9);
              },
              pl.leaves);
    }

    const std::vector<Tensor> levels{random_tensor({2, 3, 8, 8}, rng), random_tensor({2, 4, 4, 4}, rng),
                                     random_tensor({2, 4, 2, 2}, rng), random_tensor({2, 5, 1, 1}, rng)};
    {
        ParamMap ltd_params;
        SplitMix64 init(seed + 1);
        const LtdConfig ltd_cfg{3, 3};
        init_ltd(ltd_params, {3, 4, 4, 5}, ltd_cfg, init);
        ltd_params = jitter_biases(ltd_params, rng);
        const ParamLeaves fuse = pack({levels[0], levels[1], levels[2]}, with_prefix(ltd_params, "ltd.l0."));
        check("ltd_fuse",
              [fuse, ltd_cfg](Tape& t, std::span<const Tensor> l) {
                  return project(t, ltd_fuse(t, l[0], l[1], l[2], fuse.rebuild(l), "ltd.l0", ltd_cfg), 10);
              },
              fuse.leaves);
        const ParamLeaves full = pack(levels, ltd_params);
        check("build_feature_pyramid",
              [full, ltd_cfg](Tape& t, std::span<const Tensor> l) {
                  BottomUpPyramid bu{{l[0], l[1], l[2], l[3]}, {4, 8, 16, 32}};
                  return project_all(t, build_feature_pyramid(t, bu, full.rebuild(l), ltd_cfg).levels, 11);
              },
              full.leaves);
    }

    const std::vector<Tensor> pyramid{random_tensor({2, 3, 4, 4}, rng), random_tensor({2, 3, 2, 2}, rng),
                                      random_tensor({2, 3, 1, 1}, rng)};
    {
        const ParamLeaves pl = pack(pyramid, with_prefix(model_params, "det."));
        check("bbox_predict",
              [pl, cfg](Tape& t, std::span<const Tensor> l) {
                  const FeaturePyramid fp{{l[0], l[1], l[2]}, {4, 8, 16}};
                  const DetectionOutputs out = bbox_predict(t, fp, pl.rebuild(l), cfg.anchors);
                  return add(t, project_all(t, out.scores, 12), project_all(t, out.offsets, 13));
              },
              pl.leaves);
    }
    {
        const ParamLeaves pl = pack(pyramid, with_prefix(model_params, "seg.pcm."));
        check("pcm_forward",
              [pl, cfg](Tape& t, std::span<const Tensor> l) {
                  const FeaturePyramid fp{{l[0], l[1], l[2]}, {4, 8, 16}};
                  return project(t, pcm_forward(t, fp, pl.rebuild(l), cfg.pcm), 14);
              },
              pl.leaves);
        const ParamLeaves ml = pack({random_tensor({2, 3, 4, 4}, rng)}, with_prefix(model_params, "seg.mask."));
        check("mask_logits",
              [ml, cfg](Tape& t, std::span<const Tensor> l) {
                  return project(t, mask_logits(t, l[0], ml.rebuild(l), cfg.num_classes()), 15);
              },
              ml.leaves);
    }

    const AnchorSet anchors = generate_anchors(cfg.level_shapes(), cfg.anchors);
    const std::vector<std::vector<GtBox>> gts{{{1, {0.1, 0.1, 0.45, 0.5}}, {2, {0.5, 0.4, 0.95, 0.9}}},
                                              {{2, {0.2, 0.3, 0.6, 0.6}}}};
    std::vector<MatchAssignment> matches;
    for (const auto& g : gts) matches.push_back(match_anchors(anchors, g, 0.5));
    {
        std::vector<Tensor> outs;
        const std::size_t a = cfg.anchors.anchors_per_cell();
        for (std::size_t s : {4, 2, 1}) {
            outs.push_back(random_tensor({2, cfg.num_classes() * a, s, s}, rng, 2.0));
            outs.push_back(random_tensor({2, 4 * a, s, s}, rng, 2.0));
        }
        check("detection_loss",
              [&, cfg](Tape& t, std::span<const Tensor> l) {
                  const DetectionOutputs out{{l[0], l[2], l[4]}, {l[1], l[3], l[5]}};
                  return detection_loss(t, out, matches, gts, anchors, cfg.anchors, 3.0).loss;
              },
              outs);
    }
    {
        SegTarget target{2, 4, 4, {}};
        for (std::size_t i = 0; i < 32; ++i) target.ids.push_back(static_cast<std::uint8_t>(rng.uniform_int(0, 2)));
        check("segmentation_loss",
              [target](Tape& t, std::span<const Tensor> l) { return segmentation_loss(t, l[0], target); },
              {random_tensor({2, 3, 4, 4}, rng, 2.0)});
    }

    for (Mode mode : {Mode::joint, Mode::no_ltd}) {
        ParamMap used;
        for (const auto& [name, p] : model_params) {
            if (name.starts_with(mode == Mode::no_ltd ? "ltd." : "noltd.")) continue;
            used.emplace(name, p);
        }
        const ParamLeaves pl = pack({image}, used);
        check(std::string("full model total loss (") + std::string(mode_name(mode)) + ")",
              [&, pl, cfg, mode](Tape& t, std::span<const Tensor> l) {
                  const ModelOutputs out = forward_model(t, pl.rebuild(l), cfg, l[0], mode);
                  const Tensor det =
                      detection_loss(t, *out.detection, matches, gts, anchors, cfg.anchors, 3.0).loss;
                  SegTarget target{2, 4, 4, std::vector<std::uint8_t>(32, 0)};
                  for (std::size_t i = 0; i < 32; ++i) target.ids[i] = static_cast<std::uint8_t>((i * 7) % 3);
                  const Tensor seg = segmentation_loss(t, *out.mask_logits, target);
                  return total_loss(t, det, seg, 1.0, mode);
              },
              pl.leaves);
    }
    return results;
}

}  // namespace ivanet
