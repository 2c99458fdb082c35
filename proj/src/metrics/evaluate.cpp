#include "ivanet/evaluate.hpp"

#include "ivanet/train.hpp"

namespace ivanet {

Predictor model_predictor(const ParamMap& params, const ModelConfig& cfg, Mode mode) {
    return [params, cfg, mode](std::span<const GroundTruthSample* const> batch) {
        return predict(params, cfg, batch_images(batch), mode);
    };
}

EvalReport evaluate(std::span<const GroundTruthSample> samples, std::size_t num_classes, const Predictor& predictor,
                    const EvalOptions& opts) {
    EvalReport report;
    report.num_classes = num_classes;
    report.images = samples.size();
    report.ap.assign(num_classes, std::nullopt);
    report.iou.assign(num_classes, std::nullopt);

    std::vector<std::vector<ScoredBox>> dets(num_classes);
    std::vector<std::vector<ImageBox>> gts(num_classes);
    IouAccumulator iou(num_classes);

    for (std::size_t start = 0; start < samples.size(); start += opts.batch_size) {
        const std::size_t end = std::min(samples.size(), start + opts.batch_size);
        std::vector<const GroundTruthSample*> batch;
        for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
        const std::vector<Prediction> preds = predictor(batch);
        if (preds.size() != batch.size()) throw ArgumentError("evaluate: predictor returned the wrong batch size");
        for (std::size_t k = 0; k < batch.size(); ++k) {
            const std::size_t image = start + k;
            for (const GtBox& g : batch[k]->boxes) {
                gts.at(static_cast<std::size_t>(g.class_id)).push_back({image, g.box});
                ++report.ground_truths;
            }
            if (opts.detection) {
                for (const Detection& d : preds[k].detections) {
                    dets.at(static_cast<std::size_t>(d.class_id)).push_back({image, d.score, d.box});
                    ++report.detections;
                }
            }
            if (opts.segmentation) iou.add(preds[k].mask, batch[k]->mask);
        }
    }

    if (opts.detection) {
        for (std::size_t c = 1; c < num_classes; ++c) {
            report.ap[c] = average_precision(dets[c], gts[c], opts.iou_threshold);
        }
        report.map = mean_of_present(report.ap);
    }
    if (opts.segmentation) {
        const SegmentationIou seg = iou.result();
        report.iou = seg.per_class;
        report.miou = seg.mean;
    }
    return report;
}

}  // namespace ivanet
