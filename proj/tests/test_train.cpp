#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ivanet/config.hpp"
#include "ivanet/gradient_suite.hpp"
#include "ivanet/train.hpp"
#include "oracles.hpp"

using namespace ivanet;

namespace {

ModelConfig small_model() {
    ModelConfig cfg;
    cfg.backbone.stem_channels = 4;
    cfg.backbone.level_channels = {4, 6, 8, 8};
    cfg.backbone.input_size = 32;
    cfg.ltd.out_channels = 6;
    cfg.pcm = {8, 8, 6};
    return cfg;
}

std::vector<GroundTruthSample> samples(std::size_t n, std::size_t size, std::uint64_t seed) {
    std::vector<GroundTruthSample> out;
    for (auto& s : generate_shapes(n, size, 4, seed)) out.push_back(std::move(s.sample));
    return out;
}

TrainConfig short_run(Mode mode, std::size_t steps) {
    TrainConfig cfg;
    cfg.mode = mode;
    cfg.max_steps = steps;
    cfg.batch_size = 4;
    cfg.decay_milestones = {steps / 2, steps / 2 + 1};
    return cfg;
}

bool is_seg_param(const std::string& name) { return name.starts_with("seg."); }

}  // namespace

TEST(TotalLoss, JointIsDetPlusWeightedSeg) {
    Tape t;
    const Tensor det = t.leaf(Tensor::scalar(2.0)), seg = t.leaf(Tensor::scalar(0.5));
    EXPECT_EQ(total_loss(t, det, seg, 1.0, Mode::joint).item(), 2.5);
    EXPECT_EQ(total_loss(t, det, seg, 0.0, Mode::joint).item(), 2.0);
    EXPECT_EQ(total_loss(t, det, std::nullopt, 1.0, Mode::det_only).item(), 2.0);
    EXPECT_EQ(total_loss(t, std::nullopt, seg, 1.0, Mode::seg_only).item(), 0.5);
    EXPECT_THROW(total_loss(t, det, std::nullopt, 1.0, Mode::joint), ArgumentError);
}

TEST(Schedule, ExactStepValues) {
    const TrainConfig cfg;
    EXPECT_EQ(lr_at(0, cfg), 1e-4);
    EXPECT_EQ(lr_at(1499, cfg), 1e-4);
    EXPECT_EQ(lr_at(1500, cfg), 1e-5);
    EXPECT_EQ(lr_at(2399, cfg), 1e-5);
    EXPECT_EQ(lr_at(2400, cfg), 1e-6);
    EXPECT_EQ(lr_at(2999, cfg), 1e-6);
}

TEST(Schedule, OnlyThreeValues) {
    const TrainConfig cfg;
    for (std::size_t s = 0; s < cfg.max_steps; ++s) {
        const double lr = lr_at(s, cfg);
        EXPECT_TRUE(lr == cfg.lr0 || lr == cfg.lr0 / 10 || lr == cfg.lr0 / 100) << s;
    }
}

TEST(Adam, ZeroGradientLeavesParameters) {
    ParamMap p{{"a", Tensor({3}, {1.0, -2.0, 0.5})}};
    const ParamMap before = p;
    AdamState st;
    adam_step(p, {{"a", Tensor::zeros({3})}}, st, 1e-3, TrainConfig{});
    EXPECT_TRUE(p.at("a").bit_equal(before.at("a")));
}

TEST(Adam, FirstStepIsSignedLearningRate) {
    TrainConfig cfg;
    for (double g : {3.0, -0.25, 1e-3}) {
        ParamMap p{{"a", Tensor::scalar(1.0)}};
        AdamState st;
        adam_step(p, {{"a", Tensor::scalar(g)}}, st, 0.01, cfg);
        const double expect = 1.0 - 0.01 * (g > 0 ? 1 : -1) / (1.0 + cfg.adam_eps / std::abs(g));
        EXPECT_NEAR(p.at("a").item(), expect, 1e-15);
    }
}

TEST(Adam, MatchesScalarRecurrence) {
    TrainConfig cfg;
    cfg.beta1 = 0.5;
    cfg.beta2 = 0.999;
    SplitMix64 rng(3);
    ParamMap p{{"w", Tensor({2}, {0.3, -0.7})}};
    AdamState st;
    oracle::AdamScalar o0, o1;
    double s0 = 0.3, s1 = -0.7;
    for (int step = 0; step < 10; ++step) {
        const double g0 = rng.uniform(-2, 2), g1 = rng.uniform(-1e-3, 1e-3);
        adam_step(p, {{"w", Tensor({2}, {g0, g1})}}, st, 1e-2, cfg);
        s0 = o0.step(s0, g0, 1e-2, 0.5, 0.999, cfg.adam_eps);
        s1 = o1.step(s1, g1, 1e-2, 0.5, 0.999, cfg.adam_eps);
        EXPECT_NEAR(p.at("w")[0], s0, 1e-12);
        EXPECT_NEAR(p.at("w")[1], s1, 1e-12);
    }
}

TEST(Adam, ZeroLearningRateChangesNothing) {
    SplitMix64 rng(4);
    ParamMap p{{"a", random_tensor({4, 3}, rng)}, {"b", random_tensor({2}, rng)}};
    const ParamMap before = p;
    AdamState st;
    adam_step(p, {{"a", random_tensor({4, 3}, rng)}, {"b", random_tensor({2}, rng)}}, st, 0.0, TrainConfig{});
    for (const auto& [k, v] : p) EXPECT_TRUE(v.bit_equal(before.at(k))) << k;
}

TEST(Augment, FlipTwiceIsIdentity) {
    const auto s = samples(3, 32, 5);
    for (const auto& x : s) {
        const GroundTruthSample back = hflip(hflip(x));
        EXPECT_TRUE(back.image.bit_equal(x.image));
        EXPECT_EQ(back.mask, x.mask);
        ASSERT_EQ(back.boxes.size(), x.boxes.size());
        for (std::size_t i = 0; i < x.boxes.size(); ++i) {
            EXPECT_NEAR(back.boxes[i].box.xmin, x.boxes[i].box.xmin, 1e-12);
            EXPECT_NEAR(back.boxes[i].box.xmax, x.boxes[i].box.xmax, 1e-12);
            EXPECT_EQ(back.boxes[i].box.ymin, x.boxes[i].box.ymin);
        }
    }
}

TEST(Augment, FlippedBoxClosedForm) {
    GroundTruthSample s{Tensor::zeros({3, 4, 4}), {{1, {0.1, 0.2, 0.3, 0.4}}}, std::vector<std::uint8_t>(16, 0)};
    const Box b = hflip(s).boxes[0].box;
    EXPECT_NEAR(b.xmin, 0.7, 1e-15);
    EXPECT_EQ(b.ymin, 0.2);
    EXPECT_NEAR(b.xmax, 0.9, 1e-15);
    EXPECT_EQ(b.ymax, 0.4);
}

TEST(Augment, FullCropIsIdentity) {
    const auto s = samples(2, 32, 6);
    for (const auto& x : s) {
        const GroundTruthSample c = crop_resize(x, 0, 0, 32);
        EXPECT_TRUE(c.image.bit_equal(x.image));
        EXPECT_EQ(c.mask, x.mask);
        ASSERT_EQ(c.boxes.size(), x.boxes.size());
        for (std::size_t i = 0; i < x.boxes.size(); ++i) EXPECT_EQ(c.boxes[i].box.xmax, x.boxes[i].box.xmax);
    }
}

TEST(Augment, CropKeepsBoxesInsideUnitSquare) {
    const auto s = samples(20, 32, 7);
    SplitMix64 rng(8);
    for (const auto& x : s) {
        const GroundTruthSample a = augment_sample(x, rng);
        EXPECT_EQ(a.image.shape(), x.image.shape());
        EXPECT_EQ(a.mask.size(), x.mask.size());
        for (const GtBox& b : a.boxes) {
            EXPECT_GE(b.box.xmin, 0.0);
            EXPECT_LE(b.box.xmax, 1.0);
            EXPECT_LT(b.box.xmin, b.box.xmax);
        }
    }
}

TEST(BatchGradients, DetOnlyGivesZeroSegGradients) {
    const ModelConfig mc = small_model();
    const auto data = samples(2, 32, 9);
    const std::vector<const GroundTruthSample*> batch{&data[0], &data[1]};
    const AnchorSet anchors = generate_anchors(mc.level_shapes(), mc.anchors);
    const BatchLoss bl = batch_gradients(init_model(mc, 1), mc, anchors, batch, Mode::det_only, 1.0);
    for (const auto& [name, g] : bl.grads) {
        if (!is_seg_param(name)) continue;
        for (double v : g.data()) ASSERT_EQ(v, 0.0) << name;
    }
}

TEST(BatchGradients, JointIsDetPlusWeightedSeg) {
    const ModelConfig mc = small_model();
    const auto data = samples(3, 32, 10);
    const std::vector<const GroundTruthSample*> batch{&data[0], &data[1], &data[2]};
    const AnchorSet anchors = generate_anchors(mc.level_shapes(), mc.anchors);
    const ParamMap params = init_model(mc, 2);
    const double w = 0.7;
    const BatchLoss joint = batch_gradients(params, mc, anchors, batch, Mode::joint, w);
    const BatchLoss det = batch_gradients(params, mc, anchors, batch, Mode::det_only, w);
    const BatchLoss seg = batch_gradients(params, mc, anchors, batch, Mode::seg_only, w);
    EXPECT_NEAR(joint.total, det.total + w * seg.total, 1e-12);
    for (const auto& [name, g] : joint.grads) {
        const auto gd = det.grads.at(name).data(), gs = seg.grads.at(name).data();
        for (std::size_t i = 0; i < g.numel(); ++i) ASSERT_NEAR(g[i], gd[i] + w * gs[i], 1e-10) << name;
    }
}

TEST(Training, IdenticalSeedsGiveIdenticalLogs) {
    const ModelConfig mc = small_model();
    const auto data = samples(8, 32, 11);
    const TrainConfig cfg = short_run(Mode::joint, 6);
    const TrainResult a = train_loop(data, mc, cfg), b = train_loop(data, mc, cfg);
    EXPECT_EQ(format_loss_log(a.log), format_loss_log(b.log));
    for (const auto& [k, v] : a.params) EXPECT_TRUE(v.bit_equal(b.params.at(k))) << k;
    TrainConfig other = cfg;
    other.seed = 1;
    EXPECT_NE(format_loss_log(train_loop(data, mc, other).log), format_loss_log(a.log));
}

TEST(Training, DetOnlyLeavesSegParametersUntouched) {
    const ModelConfig mc = small_model();
    const auto data = samples(8, 32, 12);
    const TrainConfig cfg = short_run(Mode::det_only, 5);
    const ParamMap init = init_model(mc, cfg.seed);
    const TrainResult r = train_loop(data, mc, cfg);
    bool moved = false;
    for (const auto& [k, v] : r.params) {
        if (is_seg_param(k)) {
            EXPECT_TRUE(v.bit_equal(init.at(k))) << k;
        } else if (k.starts_with("det.")) {
            moved = moved || !v.bit_equal(init.at(k));
        }
    }
    EXPECT_TRUE(moved);
}

TEST(Training, LossLogFormat) {
    const std::vector<LossRecord> log{{0, 1e-4, 2.5, 0.5, 3.0}};
    EXPECT_EQ(format_loss_log(log), "0\t0.0001\t2.5\t0.5\t3\n");
}

TEST(Training, SmokeRunLossDecreases) {
    const ModelConfig mc;
    const auto data = samples(32, 64, 13);
    TrainConfig cfg;
    cfg.max_steps = 200;
    cfg.decay_milestones = {120, 160};
    const TrainResult r = train_loop(data, mc, cfg);
    ASSERT_EQ(r.log.size(), 200u);
    double first = 0, last = 0;
    for (std::size_t i = 0; i < 20; ++i) {
        first += r.log[i].total;
        last += r.log[180 + i].total;
    }
    EXPECT_LT(last / 20, first / 20);
}

TEST(Config, RoundTripAndErrors) {
    RunConfig cfg;
    cfg.train.lr0 = 3e-4;
    cfg.train.mode = Mode::no_ltd;
    cfg.model.anchors.scales = {0.1, 0.2, 0.3, 0.9};
    cfg.model.backbone.level_channels = {8, 16, 32, 32};
    const RunConfig back = parse_run_config(format_run_config(cfg));
    EXPECT_EQ(back.train.lr0, 3e-4);
    EXPECT_EQ(back.train.mode, Mode::no_ltd);
    EXPECT_EQ(back.model.anchors.scales, cfg.model.anchors.scales);
    EXPECT_EQ(back.model.backbone.level_channels, cfg.model.backbone.level_channels);
    EXPECT_EQ(format_run_config(back), format_run_config(cfg));
    EXPECT_THROW(parse_run_config("nonsense = 1\n"), ParseError);
    EXPECT_THROW(parse_run_config("lr0 = fast\n"), ParseError);
    TrainConfig late;
    late.max_steps = 2400;
    EXPECT_THROW(late.validate(), ConfigError);
    const RunConfig partial = parse_run_config("# comment\nbatch_size = 4\n");
    EXPECT_EQ(partial.train.batch_size, 4u);
    EXPECT_EQ(partial.train.max_steps, 3000u);
}
