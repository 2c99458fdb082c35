#include "ivanet/det_head.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "ivanet/metrics.hpp"
#include "ivanet/ops.hpp"

namespace ivanet {

namespace {

std::string head_prefix(std::size_t l, const char* branch) {
    return "det.l" + std::to_string(l) + "." + branch;
}

std::vector<Tensor> detached(const std::vector<Tensor>& ts) {
    std::vector<Tensor> out;
    for (const Tensor& t : ts) out.push_back(t.detached());
    return out;
}

}  // namespace

void AnchorConfig::validate(std::size_t levels) const {
    if (num_classes < 2) throw ConfigError("anchors: num_classes must be at least 2 (including background)");
    if (anchors_per_cell() == 0) throw ConfigError("anchors: no anchors per cell");
    if (scales.size() != levels) {
        throw ConfigError("anchors: " + std::to_string(scales.size()) + " scales for " + std::to_string(levels) +
                          " pyramid levels");
    }
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (!(scales[i] > 0.0)) throw ConfigError("anchors: scales must be positive");
        if (i > 0 && !(scales[i] > scales[i - 1])) throw ConfigError("anchors: scales must be strictly increasing");
    }
    for (double ar : aspect_ratios) {
        if (!(ar > 0.0)) throw ConfigError("anchors: aspect ratios must be positive");
    }
    if (!(variances[0] > 0.0) || !(variances[1] > 0.0)) throw ConfigError("anchors: variances must be positive");
}

void init_det_head(ParamMap& params, std::size_t levels, std::size_t channels, const AnchorConfig& cfg,
                   SplitMix64& rng) {
    const std::size_t a = cfg.anchors_per_cell();
    for (std::size_t l = 0; l < levels; ++l) {
        add_prediction_conv(params, head_prefix(l, "cls"), cfg.num_classes * a, channels, 3, rng);
        add_prediction_conv(params, head_prefix(l, "loc"), 4 * a, channels, 3, rng);
    }
}

DetectionOutputs bbox_predict(Tape& tape, const FeaturePyramid& pyramid, const ParamMap& params,
                              const AnchorConfig&) {
    DetectionOutputs out;
    for (std::size_t l = 0; l < pyramid.levels.size(); ++l) {
        const Tensor& f = pyramid.levels[l];
        const std::string cls = head_prefix(l, "cls"), loc = head_prefix(l, "loc");
        out.scores.push_back(conv2d(tape, f, param(params, cls + ".w"), param(params, cls + ".b"), {1, 1}));
        out.offsets.push_back(conv2d(tape, f, param(params, loc + ".w"), param(params, loc + ".b"), {1, 1}));
    }
    return out;
}

AnchorSet generate_anchors(std::span<const std::pair<std::size_t, std::size_t>> shapes, const AnchorConfig& cfg) {
    if (shapes.empty()) throw ArgumentError("generate_anchors: no pyramid shapes");
    cfg.validate(shapes.size());
    AnchorSet set;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const auto [h, w] = shapes[l];
        const double s = cfg.scales[l];
        std::vector<std::pair<double, double>> sizes;
        for (double ar : cfg.aspect_ratios) sizes.emplace_back(s * std::sqrt(ar), s / std::sqrt(ar));
        if (cfg.extra_scale) {
            const double next = l + 1 < cfg.scales.size() ? cfg.scales[l + 1] : 1.0;
            const double e = std::sqrt(s * next);
            sizes.emplace_back(e, e);
        }
        for (std::size_t j = 0; j < h; ++j) {
            for (std::size_t i = 0; i < w; ++i) {
                const double cx = (static_cast<double>(i) + 0.5) / static_cast<double>(w);
                const double cy = (static_cast<double>(j) + 0.5) / static_cast<double>(h);
                for (const auto& [aw, ah] : sizes) {
                    set.boxes.push_back({cx, cy, aw, ah});
                    set.level.push_back(l);
                    set.cell.push_back(j * w + i);
                }
            }
        }
    }
    return set;
}

MatchAssignment match_anchors(const AnchorSet& anchors, std::span<const GtBox> gt, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw ArgumentError("match_anchors: threshold outside (0,1)");
    const std::size_t n = anchors.size();
    MatchAssignment m;
    m.labels.assign(n, 0);
    m.gt_index.assign(n, -1);
    for (const GtBox& g : gt) {
        if (!(g.box.area() > 0.0)) throw InputError("match_anchors: ground-truth box with zero area");
        if (g.class_id <= 0) throw InputError("match_anchors: ground-truth class must be a foreground class");
    }
    if (gt.empty()) return m;

    std::vector<double> iou(n * gt.size());
    for (std::size_t a = 0; a < n; ++a) {
        const Box ab = anchors.boxes[a].corners();
        for (std::size_t g = 0; g < gt.size(); ++g) iou[a * gt.size() + g] = box_iou(ab, gt[g].box);
    }

    std::vector<bool> claimed(n, false);
    for (std::size_t g = 0; g < gt.size(); ++g) {
        std::size_t best = n;
        double best_iou = -1.0;
        for (std::size_t a = 0; a < n; ++a) {
            if (!claimed[a] && iou[a * gt.size() + g] > best_iou) {
                best = a;
                best_iou = iou[a * gt.size() + g];
            }
        }
        if (best == n) break;
        claimed[best] = true;
        m.labels[best] = gt[g].class_id;
        m.gt_index[best] = static_cast<int>(g);
    }
    for (std::size_t a = 0; a < n; ++a) {
        if (claimed[a]) continue;
        std::size_t best = 0;
        for (std::size_t g = 1; g < gt.size(); ++g) {
            if (iou[a * gt.size() + g] > iou[a * gt.size() + best]) best = g;
        }
        if (iou[a * gt.size() + best] >= iou_threshold) {
            m.labels[a] = gt[best].class_id;
            m.gt_index[a] = static_cast<int>(best);
        }
    }
    m.positives = static_cast<std::size_t>(std::count_if(m.labels.begin(), m.labels.end(), [](int c) { return c > 0; }));
    return m;
}

std::array<double, 4> encode_box(const CenterBox& a, const Box& g, const std::array<double, 2>& v) {
    const CenterBox c = CenterBox::from(g);
    if (!(a.w > 0 && a.h > 0 && c.w > 0 && c.h > 0)) throw InputError("encode_box: sizes must be positive");
    return {(c.cx - a.cx) / (a.w * v[0]), (c.cy - a.cy) / (a.h * v[0]), std::log(c.w / a.w) / v[1],
            std::log(c.h / a.h) / v[1]};
}

Box decode_box(const CenterBox& a, std::span<const double> t, const std::array<double, 2>& v) {
    const CenterBox c{a.cx + t[0] * v[0] * a.w, a.cy + t[1] * v[0] * a.h, a.w * std::exp(t[2] * v[1]),
                      a.h * std::exp(t[3] * v[1])};
    return c.corners();
}

std::vector<bool> hard_negative_mining(std::span<const double> loss, std::span<const bool> positives, double ratio) {
    if (loss.size() != positives.size()) throw ShapeError("hard_negative_mining: loss and mask sizes differ");
    if (!(ratio > 0.0)) throw ArgumentError("hard_negative_mining: ratio must be positive");
    const auto pos = static_cast<std::size_t>(std::count(positives.begin(), positives.end(), true));
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < loss.size(); ++i) {
        if (!positives[i]) negatives.push_back(i);
    }
    const std::size_t budget =
        std::min(negatives.size(), static_cast<std::size_t>(std::floor(ratio * static_cast<double>(pos))));
    std::partial_sort(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(budget), negatives.end(),
                      [&](std::size_t a, std::size_t b) { return loss[a] > loss[b] || (loss[a] == loss[b] && a < b); });
    std::vector<bool> selected(loss.size(), false);
    for (std::size_t i = 0; i < budget; ++i) selected[negatives[i]] = true;
    return selected;
}

DetectionLoss detection_loss(Tape& tape, const DetectionOutputs& outputs, std::span<const MatchAssignment> matches,
                             std::span<const std::vector<GtBox>> gt, const AnchorSet& anchors,
                             const AnchorConfig& cfg, double neg_ratio) {
    const std::size_t c = cfg.num_classes;
    const Tensor cls_rows = anchor_rows(tape, outputs.scores, c);
    const Tensor loc_rows = anchor_rows(tape, outputs.offsets, 4);
    const std::size_t batch = cls_rows.dim(0), r = cls_rows.dim(1);
    if (r != anchors.size() || loc_rows.dim(1) != r) {
        throw ShapeError("detection_loss: outputs hold " + std::to_string(r) + " anchors, anchor set has " +
                         std::to_string(anchors.size()));
    }
    if (matches.size() != batch || gt.size() != batch) {
        throw ShapeError("detection_loss: batch of " + std::to_string(batch) + " with " +
                         std::to_string(matches.size()) + " assignments");
    }

    std::vector<int> targets(batch * r, 0);
    std::vector<double> cls_w(batch * r, 0.0), loc_w(batch * r, 0.0), loc_t(batch * r * 4, 0.0);
    std::size_t positives = 0;
    std::vector<double> bg_loss(r);
    const auto pos_mask = std::make_unique<bool[]>(r);
    for (std::size_t b = 0; b < batch; ++b) {
        const MatchAssignment& m = matches[b];
        if (m.labels.size() != r) throw ShapeError("detection_loss: assignment size does not match anchors");
        const double* logits = cls_rows.data().data() + b * r * c;
        for (std::size_t a = 0; a < r; ++a) {
            const double* row = logits + a * c;
            const double mx = *std::max_element(row, row + c);
            double z = 0.0;
            for (std::size_t k = 0; k < c; ++k) z += std::exp(row[k] - mx);
            bg_loss[a] = mx + std::log(z) - row[0];
            pos_mask[a] = m.labels[a] > 0;
        }
        const std::vector<bool> mined = hard_negative_mining(bg_loss, std::span<const bool>(pos_mask.get(), r), neg_ratio);
        for (std::size_t a = 0; a < r; ++a) {
            const std::size_t i = b * r + a;
            if (pos_mask[a]) {
                targets[i] = m.labels[a];
                cls_w[i] = 1.0;
                loc_w[i] = 1.0;
                const auto t = encode_box(anchors.boxes[a], gt[b].at(static_cast<std::size_t>(m.gt_index[a])).box,
                                          cfg.variances);
                std::copy(t.begin(), t.end(), loc_t.begin() + static_cast<std::ptrdiff_t>(i * 4));
            } else if (mined[a]) {
                cls_w[i] = 1.0;
            }
        }
        positives += m.positives;
    }

    DetectionLoss out;
    out.normalizer = std::max<std::size_t>(1, positives);
    const Tensor cls = softmax_cross_entropy(tape, cls_rows, targets, cls_w);
    const Tensor loc = smooth_l1(tape, loc_rows, loc_t, loc_w);
    out.cls_sum = cls.item();
    out.loc_sum = loc.item();
    out.loss = scale(tape, add(tape, cls, loc), 1.0 / static_cast<double>(out.normalizer));
    return out;
}

std::vector<Detection> decode_detections(const DetectionOutputs& outputs, std::size_t image, const AnchorSet& anchors,
                                         const AnchorConfig& cfg, double score_threshold, std::size_t top_k) {
    if (!(score_threshold > 0.0 && score_threshold < 1.0)) {
        throw ArgumentError("decode_detections: score threshold outside (0,1)");
    }
    Tape scratch;
    const std::vector<Tensor> score_levels = detached(outputs.scores), offset_levels = detached(outputs.offsets);
    const Tensor cls_rows = anchor_rows(scratch, score_levels, cfg.num_classes);
    const Tensor loc_rows = anchor_rows(scratch, offset_levels, 4);
    const std::size_t c = cfg.num_classes, r = cls_rows.dim(1);
    if (r != anchors.size()) throw ShapeError("decode_detections: anchor count mismatch");
    if (image >= cls_rows.dim(0)) throw ArgumentError("decode_detections: image index out of range");

    std::vector<Detection> dets;
    std::vector<double> prob(c);
    for (std::size_t a = 0; a < r; ++a) {
        const double* row = cls_rows.data().data() + (image * r + a) * c;
        const double mx = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t k = 0; k < c; ++k) z += prob[k] = std::exp(row[k] - mx);
        Box box;
        bool decoded = false;
        for (std::size_t k = 1; k < c; ++k) {
            const double p = prob[k] / z;
            if (p < score_threshold) continue;
            if (!decoded) {
                box = decode_box(anchors.boxes[a], loc_rows.data().subspan((image * r + a) * 4, 4), cfg.variances);
                box = {std::clamp(box.xmin, 0.0, 1.0), std::clamp(box.ymin, 0.0, 1.0), std::clamp(box.xmax, 0.0, 1.0),
                       std::clamp(box.ymax, 0.0, 1.0)};
                decoded = true;
            }
            if (!(box.xmin < box.xmax && box.ymin < box.ymax)) break;
            dets.push_back({static_cast<int>(k), p, box});
        }
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    if (dets.size() > top_k) dets.resize(top_k);
    return dets;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    std::vector<Detection> kept;
    for (std::size_t i : order) {
        const Detection& d = dets[i];
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return k.class_id == d.class_id && box_iou(k.box, d.box) > iou_threshold;
        });
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

}  // namespace ivanet
