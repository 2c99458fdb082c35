#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ivanet/geometry.hpp"

namespace ivanet {

/// Intersection over union; 0 for disjoint or degenerate boxes.
double box_iou(const Box& a, const Box& b);

struct ScoredBox {
    std::size_t image = 0;
    double score = 0;
    Box box;
};

struct ImageBox {
    std::size_t image = 0;
    Box box;
};

/// VOC-style AP for one class: detections sorted by score are greedily
/// matched to the highest-IoU unmatched ground truth of their image; AP is
/// the area under the monotone-interpolated precision/recall curve. Returns
/// nullopt when there are neither detections nor ground truths.
std::optional<double> average_precision(std::span<const ScoredBox> dets, std::span<const ImageBox> gts,
                                        double iou_threshold = 0.5);

struct SegmentationIou {
    /// Per class; nullopt when the class is absent from both masks.
    std::vector<std::optional<double>> per_class;
    std::optional<double> mean;
};

/// Per-class IoU between two label masks of equal size, accumulated as
/// intersection and union pixel counts.
class IouAccumulator {
public:
    explicit IouAccumulator(std::size_t num_classes);
    void add(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);
    SegmentationIou result() const;

private:
    std::size_t num_classes_;
    std::vector<std::uint64_t> inter_, uni_;
};

SegmentationIou mean_iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                         std::size_t num_classes);

struct EvalReport {
    std::size_t num_classes = 0;
    /// Indexed by class id; entry 0 (background) is always nullopt.
    std::vector<std::optional<double>> ap;
    std::vector<std::optional<double>> iou;
    std::optional<double> map;
    std::optional<double> miou;
    std::size_t images = 0;
    std::size_t ground_truths = 0;
    std::size_t detections = 0;
};

/// Mean of the present entries, or nullopt when none are present.
std::optional<double> mean_of_present(std::span<const std::optional<double>> values);

/// `class<TAB>AP<TAB>IoU` per class, then mAP and mIoU summary lines.
/// Missing values print as "absent".
std::string format_report(const EvalReport& report);

}  // namespace ivanet
