#pragma once

#include "detref/model.hpp"
#include "detref/synthdata.hpp"

#include <ostream>
#include <span>
#include <vector>

namespace detref {

enum class ConfidenceSource { classification, iou_pred, aligned_iou, oracle_iou };
enum class IouSpace { three_d, bev };

struct NmsConfig {
    ConfidenceSource source = ConfidenceSource::aligned_iou;
    IouSpace space = IouSpace::three_d;
    double threshold = 0.1;    ///< suppress overlaps above this IoU
    double score_floor = 0.3;  ///< classification filter before NMS
};

/// One detection per proposal: refined box, classification score, predicted
/// IoU. Proposals with an empty crop come back degenerate with cls forced to 0.
std::vector<Detection> infer_first_pass(const Scene& scene, std::span<const Proposal> proposals,
                                        Model& model);

/// One-shot second inference: each refined box goes back through the feature
/// path and ONLY iou_pred is overwritten; boxes and classification scores are
/// untouched, and no further loop runs.
void iou_align(std::vector<Detection>& detections, const Scene& scene, Model& model);

/// Ranking value for the configured source; oracle needs ground truth.
double detection_confidence(const Detection& det, ConfidenceSource source,
                            std::span<const OrientedBox3D> gt_boxes);

/// Greedy suppression ordered by the chosen confidence (ties keep the lower
/// input index); drops boxes whose IoU with a kept box exceeds the threshold.
std::vector<Detection> nms(std::span<const Detection> detections, const NmsConfig& cfg,
                           std::span<const OrientedBox3D> gt_boxes = {});

/// First pass, optional alignment, classification floor, then NMS.
std::vector<Detection> full_inference(const Scene& scene, std::span<const Proposal> proposals,
                                      Model& model, const NmsConfig& cfg,
                                      std::span<const OrientedBox3D> gt_boxes = {});

/// Comma-separated dump, 9 decimal digits:
/// scene,cx,cy,cz,l,w,h,yaw,cls_score,iou_pred,aligned
void write_detections(std::ostream& out, int scene_id, std::span<const Detection> detections);

}  // namespace detref
