#include "ivanet/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ivanet {

double box_iou(const Box& a, const Box& b) {
    if (!(a.width() > 0 && a.height() > 0 && b.width() > 0 && b.height() > 0)) {
        static bool warned = false;
        if (!warned) {
            std::clog << "warning: box_iou called with a degenerate box\n";
            warned = true;
        }
        return 0.0;
    }
    const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
    const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

std::optional<double> average_precision(std::span<const ScoredBox> dets, std::span<const ImageBox> gts,
                                        double iou_threshold) {
    if (dets.empty() && gts.empty()) return std::nullopt;
    if (gts.empty()) return 0.0;

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

    std::vector<bool> used(gts.size(), false);
    std::vector<double> precision, recall;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i : order) {
        const ScoredBox& d = dets[i];
        std::size_t best = gts.size();
        double best_iou = iou_threshold;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (used[g] || gts[g].image != d.image) continue;
            const double iou = box_iou(d.box, gts[g].box);
            if (iou >= best_iou && (best == gts.size() || iou > best_iou)) {
                best = g;
                best_iou = iou;
            }
        }
        if (best < gts.size()) {
            used[best] = true;
            ++tp;
        } else {
            ++fp;
        }
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
    }

    // Continuous integration over the precision envelope.
    std::vector<double> mrec{0.0}, mpre{0.0};
    mrec.insert(mrec.end(), recall.begin(), recall.end());
    mpre.insert(mpre.end(), precision.begin(), precision.end());
    mrec.push_back(1.0);
    mpre.push_back(0.0);
    for (std::size_t i = mpre.size() - 1; i-- > 0;) mpre[i] = std::max(mpre[i], mpre[i + 1]);
    double ap = 0.0;
    for (std::size_t i = 1; i < mrec.size(); ++i) {
        if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
    }
    return ap;
}

IouAccumulator::IouAccumulator(std::size_t num_classes)
    : num_classes_(num_classes), inter_(num_classes, 0), uni_(num_classes, 0) {}

void IouAccumulator::add(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
    if (pred.size() != gt.size()) {
        throw std::invalid_argument("mean_iou: prediction has " + std::to_string(pred.size()) +
                                    " pixels, target has " + std::to_string(gt.size()));
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const std::size_t p = pred[i], g = gt[i];
        if (p >= num_classes_ || g >= num_classes_) throw std::invalid_argument("mean_iou: class id out of range");
        if (p == g) {
            ++inter_[p];
            ++uni_[p];
        } else {
            ++uni_[p];
            ++uni_[g];
        }
    }
}

SegmentationIou IouAccumulator::result() const {
    SegmentationIou out;
    out.per_class.resize(num_classes_);
    for (std::size_t c = 0; c < num_classes_; ++c) {
        if (uni_[c] > 0) out.per_class[c] = static_cast<double>(inter_[c]) / static_cast<double>(uni_[c]);
    }
    out.mean = mean_of_present(out.per_class);
    return out;
}

SegmentationIou mean_iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                         std::size_t num_classes) {
    IouAccumulator acc(num_classes);
    acc.add(pred, gt);
    return acc.result();
}

std::optional<double> mean_of_present(std::span<const std::optional<double>> values) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& v : values) {
        if (v) {
            s += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return s / static_cast<double>(n);
}

std::string format_report(const EvalReport& r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    auto cell = [&](const std::optional<double>& v) {
        if (v) {
            os << *v;
        } else {
            os << "absent";
        }
    };
    for (std::size_t c = 0; c < r.num_classes; ++c) {
        os << c << '\t';
        cell(c < r.ap.size() ? r.ap[c] : std::nullopt);
        os << '\t';
        cell(c < r.iou.size() ? r.iou[c] : std::nullopt);
        os << '\n';
    }
    os << "mAP\t";
    cell(r.map);
    os << "\nmIoU\t";
    cell(r.miou);
    os << "\nimages\t" << r.images << "\nground_truths\t" << r.ground_truths << "\ndetections\t" << r.detections
       << '\n';
    return os.str();
}

}  // namespace ivanet
