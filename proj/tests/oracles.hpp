#pragma once

// Straightforward reference implementations used as test oracles. They are
// written independently of the library code paths they check: plain loops,
// no im2col, no envelope tricks, no shared helpers beyond value types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "ivanet/det_head.hpp"
#include "ivanet/metrics.hpp"
#include "ivanet/tensor.hpp"

namespace oracle {

using ivanet::Box;
using ivanet::CenterBox;
using ivanet::Tensor;

inline std::vector<double> conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                                  std::size_t pad) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t k = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
    std::vector<double> out(n * k * oh * ow, 0.0);
    for (std::size_t in = 0; in < n; ++in)
        for (std::size_t ik = 0; ik < k; ++ik)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double acc = b.empty() ? 0.0 : b[ik];
                    for (std::size_t ic = 0; ic < c; ++ic)
                        for (std::size_t ky = 0; ky < kh; ++ky)
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) {
                                    continue;
                                }
                                acc += x.at(in, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                                       w.at(ik, ic, ky, kx);
                            }
                    out[((in * k + ik) * oh + oy) * ow + ox] = acc;
                }
    return out;
}

// Scalar bilinear sample at output pixel (oy, ox) using the half-pixel map.
inline double bilinear_pixel(const Tensor& x, std::size_t n, std::size_t c, std::size_t oh, std::size_t ow,
                             std::size_t oy, std::size_t ox) {
    const double h = static_cast<double>(x.dim(2)), w = static_cast<double>(x.dim(3));
    const double sy = std::clamp((static_cast<double>(oy) + 0.5) * h / static_cast<double>(oh) - 0.5, 0.0, h - 1);
    const double sx = std::clamp((static_cast<double>(ox) + 0.5) * w / static_cast<double>(ow) - 0.5, 0.0, w - 1);
    const auto y0 = static_cast<std::size_t>(std::floor(sy)), x0 = static_cast<std::size_t>(std::floor(sx));
    const std::size_t y1 = std::min(y0 + 1, x.dim(2) - 1), x1 = std::min(x0 + 1, x.dim(3) - 1);
    const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
    return (1 - fy) * ((1 - fx) * x.at(n, c, y0, x0) + fx * x.at(n, c, y0, x1)) +
           fy * ((1 - fx) * x.at(n, c, y1, x0) + fx * x.at(n, c, y1, x1));
}

inline double iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin));
    const double iy = std::max(0.0, std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin));
    const double inter = ix * iy;
    const double uni = (a.xmax - a.xmin) * (a.ymax - a.ymin) + (b.xmax - b.xmin) * (b.ymax - b.ymin) - inter;
    return uni > 0 ? inter / uni : 0.0;
}

inline Box corners(const CenterBox& c) { return {c.cx - c.w / 2, c.cy - c.h / 2, c.cx + c.w / 2, c.cy + c.h / 2}; }

// Rule (a) then rule (b), applied literally over the full IoU table.
inline std::pair<std::vector<int>, std::vector<int>> match(const std::vector<CenterBox>& anchors,
                                                           const std::vector<ivanet::GtBox>& gts, double thr) {
    const std::size_t n = anchors.size();
    std::vector<int> labels(n, 0), index(n, -1);
    std::vector<std::vector<double>> table(n, std::vector<double>(gts.size()));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t g = 0; g < gts.size(); ++g) table[a][g] = iou(corners(anchors[a]), gts[g].box);
    std::vector<bool> taken(n, false);
    for (std::size_t g = 0; g < gts.size(); ++g) {
        std::optional<std::size_t> best;
        for (std::size_t a = 0; a < n; ++a) {
            if (taken[a]) continue;
            if (!best || table[a][g] > table[*best][g]) best = a;
        }
        if (!best) break;
        taken[*best] = true;
        labels[*best] = gts[g].class_id;
        index[*best] = static_cast<int>(g);
    }
    for (std::size_t a = 0; a < n; ++a) {
        if (taken[a] || gts.empty()) continue;
        double top = -1;
        int arg = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (table[a][g] > top) {
                top = table[a][g];
                arg = static_cast<int>(g);
            }
        }
        if (top >= thr) {
            labels[a] = gts[static_cast<std::size_t>(arg)].class_id;
            index[a] = arg;
        }
    }
    return {labels, index};
}

// Quadratic suppressor: a detection survives if no higher-ranked survivor of
// its class overlaps it above the threshold. Ranking is by score, then input
// order.
inline std::vector<ivanet::Detection> nms(const std::vector<ivanet::Detection>& dets, double thr) {
    const std::size_t n = dets.size();
    auto ranks_before = [&](std::size_t i, std::size_t j) {
        return dets[i].score > dets[j].score || (dets[i].score == dets[j].score && i < j);
    };
    std::vector<int> state(n, -1);  // -1 undecided, 0 suppressed, 1 kept
    for (std::size_t round = 0; round < n; ++round) {
        // pick the highest-ranked undecided detection
        std::optional<std::size_t> pick;
        for (std::size_t i = 0; i < n; ++i) {
            if (state[i] == -1 && (!pick || ranks_before(i, *pick))) pick = i;
        }
        if (!pick) break;
        bool keep = true;
        for (std::size_t j = 0; j < n; ++j) {
            if (state[j] == 1 && dets[j].class_id == dets[*pick].class_id && iou(dets[j].box, dets[*pick].box) > thr) {
                keep = false;
            }
        }
        state[*pick] = keep ? 1 : 0;
    }
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < n; ++i) {
        if (state[i] == 1) kept.push_back(i);
    }
    std::sort(kept.begin(), kept.end(), ranks_before);
    std::vector<ivanet::Detection> out;
    for (std::size_t i : kept) out.push_back(dets[i]);
    return out;
}

// AP by enumerating the PR curve: for every rank k compute (recall_k,
// precision_k); interpolated precision at recall r is the max precision over
// all points with recall >= r; integrate over each distinct recall step.
inline double average_precision(const std::vector<ivanet::ScoredBox>& dets, const std::vector<ivanet::ImageBox>& gts,
                                double thr) {
    if (gts.empty()) return 0.0;
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    std::vector<bool> used(gts.size(), false);
    std::vector<double> rec, prec;
    double tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& d = dets[order[k]];
        double best = -1;
        std::optional<std::size_t> arg;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (used[g] || gts[g].image != d.image) continue;
            const double v = iou(d.box, gts[g].box);
            if (v >= thr && v > best) {
                best = v;
                arg = g;
            }
        }
        if (arg) {
            used[*arg] = true;
            tp += 1;
        }
        rec.push_back(tp / static_cast<double>(gts.size()));
        prec.push_back(tp / static_cast<double>(k + 1));
    }
    double ap = 0, prev = 0;
    for (std::size_t k = 0; k < rec.size(); ++k) {
        if (rec[k] == prev) continue;
        double p = 0;
        for (std::size_t j = 0; j < rec.size(); ++j) {
            if (rec[j] >= rec[k]) p = std::max(p, prec[j]);
        }
        ap += (rec[k] - prev) * p;
        prev = rec[k];
    }
    return ap;
}

// -log softmax(row)[t], computed without max subtraction shortcuts beyond
// what keeps exp finite.
inline double cross_entropy(const std::vector<double>& row, int t) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double z = 0;
    for (double v : row) z += std::exp(v - mx);
    return -(row[static_cast<std::size_t>(t)] - mx - std::log(z));
}

inline double smooth_l1(double d) {
    const double a = std::abs(d);
    return a < 1 ? 0.5 * d * d : a - 0.5;
}

// Per-pixel mean cross-entropy over logits [N,C,H,W].
inline double segmentation_loss(const Tensor& logits, const std::vector<std::uint8_t>& ids) {
    const std::size_t n = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    double total = 0;
    for (std::size_t in = 0; in < n; ++in)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                std::vector<double> row(c);
                for (std::size_t k = 0; k < c; ++k) row[k] = logits.at(in, k, y, x);
                total += cross_entropy(row, ids[(in * h + y) * w + x]);
            }
    return total / static_cast<double>(n * h * w);
}

// Per-class IoU by counting pixels directly.
inline std::vector<std::optional<double>> class_iou(const std::vector<std::uint8_t>& pred,
                                                    const std::vector<std::uint8_t>& gt, std::size_t classes) {
    std::vector<std::optional<double>> out(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const bool p = pred[i] == c, g = gt[i] == c;
            inter += p && g;
            uni += p || g;
        }
        if (uni > 0) out[c] = static_cast<double>(inter) / static_cast<double>(uni);
    }
    return out;
}

struct AdamScalar {
    double m = 0, v = 0;
    int t = 0;

    double step(double p, double g, double lr, double b1, double b2, double eps) {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        return p - lr * mh / (std::sqrt(vh) + eps);
    }
};

}  // namespace oracle
