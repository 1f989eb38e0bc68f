#include "detref/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace detref {

namespace {

struct HeadReadout {
    double cls_score = 0.0;
    double iou_pred = 0.0;
    RegressionOffsets offsets{};
    bool degenerate = true;
};

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

HeadReadout run_heads(const Scene& scene, const OrientedBox3D& box, Model& model) {
    const SampledPoints pts =
        sample_proposal_points(scene, box, model.cfg.points_per_proposal, model.cfg.crop_margin);
    HeadReadout out;
    if (pts.empty()) return out;
    nn::Tape tape;
    const std::uint64_t stream = proposal_stream_seed(scene.seed, box);
    const nn::Var fused = proposal_feature(tape, model, pts.coords, pts.descriptors, box, stream);
    const HeadsOut heads = model_heads(tape, model, fused);
    out.cls_score = sigmoid(tape.val(heads.cls_logit)(0, 0));
    out.iou_pred = sigmoid(tape.val(heads.iou_logit)(0, 0));
    out.offsets = offsets_from_row(tape.val(heads.reg));
    out.degenerate = false;
    return out;
}

}  // namespace

std::vector<Detection> infer_first_pass(const Scene& scene, std::span<const Proposal> proposals,
                                        Model& model) {
    std::vector<Detection> detections;
    detections.reserve(proposals.size());
    for (const Proposal& proposal : proposals) {
        const HeadReadout head = run_heads(scene, proposal.box, model);
        Detection det;
        det.proposal_id = proposal.id;
        if (head.degenerate) {
            det.box = proposal.box;
            det.cls_score = 0.0;
            det.iou_pred = 0.0;
            det.degenerate = true;
        } else {
            det.box = decode_refinement(proposal.box, head.offsets);
            det.cls_score = head.cls_score;
            det.iou_pred = head.iou_pred;
        }
        detections.push_back(det);
    }
    return detections;
}

void iou_align(std::vector<Detection>& detections, const Scene& scene, Model& model) {
    for (Detection& det : detections) {
        const HeadReadout head = run_heads(scene, det.box, model);
        // Regression and classification outputs of the second pass are discarded.
        det.iou_pred = head.degenerate ? 0.0 : head.iou_pred;
        det.aligned = true;
    }
}

double detection_confidence(const Detection& det, ConfidenceSource source,
                            std::span<const OrientedBox3D> gt_boxes) {
    switch (source) {
        case ConfidenceSource::classification:
            return det.cls_score;
        case ConfidenceSource::iou_pred:
        case ConfidenceSource::aligned_iou:
            return det.iou_pred;
        case ConfidenceSource::oracle_iou: {
            if (gt_boxes.empty())
                throw std::invalid_argument("detection_confidence: oracle mode requires ground truth");
            double best = 0.0;
            for (const OrientedBox3D& gt : gt_boxes) best = std::max(best, iou_3d(det.box, gt));
            return best;
        }
    }
    return 0.0;
}

std::vector<Detection> nms(std::span<const Detection> detections, const NmsConfig& cfg,
                           std::span<const OrientedBox3D> gt_boxes) {
    std::vector<double> confidence(detections.size());
    for (std::size_t i = 0; i < detections.size(); ++i)
        confidence[i] = detection_confidence(detections[i], cfg.source, gt_boxes);

    std::vector<int> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return confidence[static_cast<std::size_t>(a)] > confidence[static_cast<std::size_t>(b)];
    });

    std::vector<bool> suppressed(detections.size(), false);
    std::vector<Detection> kept;
    for (const int i : order) {
        if (suppressed[static_cast<std::size_t>(i)]) continue;
        kept.push_back(detections[static_cast<std::size_t>(i)]);
        for (const int j : order) {
            if (j == i || suppressed[static_cast<std::size_t>(j)]) continue;
            const double overlap =
                cfg.space == IouSpace::three_d
                    ? iou_3d(detections[static_cast<std::size_t>(i)].box,
                             detections[static_cast<std::size_t>(j)].box)
                    : bev_iou(detections[static_cast<std::size_t>(i)].box,
                              detections[static_cast<std::size_t>(j)].box);
            if (overlap > cfg.threshold) suppressed[static_cast<std::size_t>(j)] = true;
        }
    }
    return kept;
}

std::vector<Detection> full_inference(const Scene& scene, std::span<const Proposal> proposals,
                                      Model& model, const NmsConfig& cfg,
                                      std::span<const OrientedBox3D> gt_boxes) {
    std::vector<Detection> detections = infer_first_pass(scene, proposals, model);
    if (cfg.source == ConfidenceSource::aligned_iou) iou_align(detections, scene, model);
    std::erase_if(detections, [&](const Detection& d) { return d.cls_score < cfg.score_floor; });
    return nms(detections, cfg, gt_boxes);
}

void write_detections(std::ostream& out, int scene_id, std::span<const Detection> detections) {
    char line[256];
    for (const Detection& d : detections) {
        std::snprintf(line, sizeof(line),
                      "%d,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%d\n", scene_id, d.box.cx,
                      d.box.cy, d.box.cz, d.box.l, d.box.w, d.box.h, d.box.yaw, d.cls_score,
                      d.iou_pred, d.aligned ? 1 : 0);
        out << line;
    }
}

}  // namespace detref
