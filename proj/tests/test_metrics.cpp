#include <gtest/gtest.h>

#include <cmath>

#include "ivanet/evaluate.hpp"
#include "ivanet/metrics.hpp"
#include "ivanet/rng.hpp"
#include "oracles.hpp"

using namespace ivanet;

namespace {

Box random_box(SplitMix64& rng) {
    const double x = rng.uniform(0, 0.7), y = rng.uniform(0, 0.7);
    return {x, y, x + rng.uniform(0.05, 0.3), y + rng.uniform(0.05, 0.3)};
}

// Random scenario where detections are jittered copies of ground truths
// plus clutter, spread over a few images.
void random_scenario(SplitMix64& rng, std::vector<ScoredBox>& dets, std::vector<ImageBox>& gts) {
    const std::size_t images = static_cast<std::size_t>(rng.uniform_int(1, 3));
    for (std::size_t i = 0; i < images; ++i) {
        const auto n = rng.uniform_int(0, 3);
        for (int g = 0; g < n; ++g) {
            const Box b = random_box(rng);
            gts.push_back({i, b});
            for (int k = 0, copies = static_cast<int>(rng.uniform_int(0, 2)); k < copies; ++k) {
                const double j = rng.uniform(-0.05, 0.05);
                dets.push_back({i, static_cast<double>(rng.uniform_int(1, 20)) / 20.0,
                                {b.xmin + j, b.ymin - j, b.xmax + j, b.ymax}});
            }
        }
        for (int k = 0, clutter = static_cast<int>(rng.uniform_int(0, 3)); k < clutter; ++k) {
            dets.push_back({i, static_cast<double>(rng.uniform_int(1, 20)) / 20.0, random_box(rng)});
        }
    }
}

}  // namespace

TEST(BoxIou, ClosedForms) {
    const Box a{0, 0, 2, 2};
    EXPECT_EQ(box_iou(a, a), 1.0);
    EXPECT_EQ(box_iou(a, {3, 3, 4, 4}), 0.0);
    EXPECT_DOUBLE_EQ(box_iou(a, {1, 0, 3, 2}), 1.0 / 3.0);
    EXPECT_EQ(box_iou(a, {1, 1, 1, 2}), 0.0);  // degenerate
}

TEST(BoxIou, SymmetricAndBounded) {
    SplitMix64 rng(1);
    for (int i = 0; i < 500; ++i) {
        const Box a = random_box(rng), b = random_box(rng);
        const double v = box_iou(a, b);
        EXPECT_EQ(v, box_iou(b, a));
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        EXPECT_NEAR(v, oracle::iou(a, b), 1e-15);
    }
}

TEST(AveragePrecision, PerfectAndMissed) {
    const std::vector<ImageBox> gt{{0, {0.1, 0.1, 0.4, 0.4}}};
    EXPECT_EQ(*average_precision(std::vector<ScoredBox>{{0, 0.9, {0.1, 0.1, 0.4, 0.4}}}, gt), 1.0);
    EXPECT_EQ(*average_precision(std::vector<ScoredBox>{{0, 0.9, {0.6, 0.6, 0.9, 0.9}}}, gt), 0.0);
    EXPECT_FALSE(average_precision({}, {}).has_value());
    EXPECT_EQ(*average_precision(std::vector<ScoredBox>{{0, 0.9, {0.6, 0.6, 0.9, 0.9}}}, {}), 0.0);
}

TEST(AveragePrecision, HandScenario) {
    // Three ground truths in two images; ranks: TP, FP, TP, duplicate (FP), TP.
    const std::vector<ImageBox> gt{{0, {0.0, 0.0, 0.2, 0.2}}, {0, {0.5, 0.5, 0.8, 0.8}}, {1, {0.1, 0.1, 0.5, 0.5}}};
    const std::vector<ScoredBox> dets{{0, 0.95, {0.0, 0.0, 0.2, 0.2}},
                                      {1, 0.90, {0.6, 0.6, 0.9, 0.9}},
                                      {1, 0.80, {0.1, 0.1, 0.5, 0.52}},
                                      {1, 0.70, {0.1, 0.1, 0.5, 0.5}},
                                      {0, 0.60, {0.5, 0.5, 0.8, 0.81}}};
    // PR points: (1/3,1), (1/3,1/2), (2/3,2/3), (2/3,1/2), (1,3/5)
    const double expect = (1.0 / 3) * 1.0 + (1.0 / 3) * (2.0 / 3) + (1.0 / 3) * 0.6;
    EXPECT_NEAR(*average_precision(dets, gt), expect, 1e-15);
    EXPECT_NEAR(*average_precision(dets, gt), oracle::average_precision(dets, gt, 0.5), 1e-15);
}

TEST(AveragePrecision, AgreesWithEnumerationOracle) {
    SplitMix64 rng(2);
    for (int s = 0; s < 200; ++s) {
        std::vector<ScoredBox> dets;
        std::vector<ImageBox> gts;
        random_scenario(rng, dets, gts);
        const auto ap = average_precision(dets, gts);
        if (dets.empty() && gts.empty()) {
            EXPECT_FALSE(ap.has_value());
            continue;
        }
        EXPECT_NEAR(*ap, oracle::average_precision(dets, gts, 0.5), 1e-12) << "scenario " << s;
    }
}

TEST(AveragePrecision, InvariantUnderMonotoneScoreMap) {
    SplitMix64 rng(3);
    for (int s = 0; s < 50; ++s) {
        std::vector<ScoredBox> dets;
        std::vector<ImageBox> gts;
        random_scenario(rng, dets, gts);
        if (gts.empty()) continue;
        std::vector<ScoredBox> mapped = dets;
        for (auto& d : mapped) d.score = std::exp(3 * d.score) - 7;
        EXPECT_EQ(*average_precision(dets, gts), *average_precision(mapped, gts));
    }
}

TEST(MeanIou, IdenticalMasks) {
    const std::vector<std::uint8_t> m{0, 1, 1, 2, 0, 0};
    const SegmentationIou r = mean_iou(m, m, 4);
    EXPECT_EQ(*r.per_class[0], 1.0);
    EXPECT_EQ(*r.per_class[2], 1.0);
    EXPECT_FALSE(r.per_class[3].has_value());
    EXPECT_EQ(*r.mean, 1.0);
}

TEST(MeanIou, HalfCoverage) {
    const std::vector<std::uint8_t> gt{1, 1, 1, 1, 0, 0}, pred{1, 1, 0, 0, 0, 0};
    EXPECT_EQ(*mean_iou(pred, gt, 2).per_class[1], 0.5);
}

TEST(MeanIou, AgreesWithCountingOracle) {
    SplitMix64 rng(4);
    for (int s = 0; s < 20; ++s) {
        std::vector<std::uint8_t> a(256), b(256);
        for (auto& v : a) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));  // class 4 absent
        for (auto& v : b) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
        const SegmentationIou r = mean_iou(a, b, 5);
        const auto expect = oracle::class_iou(a, b, 5);
        double total = 0;
        int present = 0;
        for (std::size_t c = 0; c < 5; ++c) {
            ASSERT_EQ(r.per_class[c].has_value(), expect[c].has_value());
            if (!expect[c]) continue;
            EXPECT_NEAR(*r.per_class[c], *expect[c], 1e-15);
            total += *expect[c];
            ++present;
        }
        EXPECT_NEAR(*r.mean, total / present, 1e-15);
    }
}

TEST(MeanIou, RelabelingPermutesClasses) {
    SplitMix64 rng(5);
    std::vector<std::uint8_t> a(100), b(100);
    for (auto& v : a) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
    for (auto& v : b) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
    const std::uint8_t perm[4] = {2, 0, 3, 1};
    std::vector<std::uint8_t> pa(100), pb(100);
    for (std::size_t i = 0; i < 100; ++i) {
        pa[i] = perm[a[i]];
        pb[i] = perm[b[i]];
    }
    const auto r = mean_iou(a, b, 4), q = mean_iou(pa, pb, 4);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(*r.per_class[c], *q.per_class[perm[c]]);
    EXPECT_NEAR(*r.mean, *q.mean, 1e-15);
}

TEST(MeanIou, RejectsSizeMismatch) {
    const std::vector<std::uint8_t> a{0, 1}, b{0};
    EXPECT_THROW(mean_iou(a, b, 2), std::invalid_argument);
}

TEST(Evaluate, PerfectPredictorScoresOne) {
    std::vector<GroundTruthSample> data;
    for (auto& s : generate_shapes(6, 32, 4, 1)) data.push_back(std::move(s.sample));
    const Predictor perfect = [](std::span<const GroundTruthSample* const> batch) {
        std::vector<Prediction> out;
        for (const GroundTruthSample* s : batch) {
            Prediction p;
            for (const GtBox& b : s->boxes) p.detections.push_back({b.class_id, 1.0, b.box});
            p.mask = s->mask;
            out.push_back(p);
        }
        return out;
    };
    const EvalReport r = evaluate(data, 4, perfect);
    EXPECT_EQ(*r.map, 1.0);
    EXPECT_EQ(*r.miou, 1.0);
    EXPECT_FALSE(r.ap[0].has_value());
    const std::string text = format_report(r);
    EXPECT_NE(text.find("mAP\t1.000000\n"), std::string::npos) << text;
    EXPECT_NE(text.find("mIoU\t1.000000\n"), std::string::npos) << text;
}

TEST(Evaluate, ReportMarksAbsentEntries) {
    EvalReport r;
    r.num_classes = 2;
    r.ap = {std::nullopt, 0.5};
    r.iou = {std::nullopt, std::nullopt};
    r.map = 0.5;
    const std::string text = format_report(r);
    EXPECT_NE(text.find("1\t0.500000\tabsent\n"), std::string::npos) << text;
    EXPECT_NE(text.find("mIoU\tabsent\n"), std::string::npos) << text;
}
