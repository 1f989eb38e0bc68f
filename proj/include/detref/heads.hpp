#pragma once

#include "detref/geom.hpp"
#include "detref/nn.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace detref {

struct Proposal {
    OrientedBox3D box;
    int id = -1;
};

struct Detection {
    OrientedBox3D box;       ///< refined box
    double cls_score = 0.0;
    double iou_pred = 0.0;   ///< A_i
    bool aligned = false;
    bool degenerate = false; ///< no points inside the expanded proposal
    int proposal_id = -1;
};

/// Refinement encoding: center offsets normalized by the proposal's BEV
/// diagonal and rotated into the proposal frame, log-ratio sizes, yaw delta.
struct RegressionOffsets {
    double dx = 0.0, dy = 0.0, dz = 0.0;
    double dl = 0.0, dw = 0.0, dh = 0.0;
    double dyaw = 0.0;
};

struct LossThresholds {
    double positive = 0.6;
    double negative = 0.45;
    double gate = 0.55;  ///< regression / IoU / corner losses apply at G_i >= gate
};

enum class MatchLabel { positive, negative, ignore };

struct TargetAssignment {
    MatchLabel label = MatchLabel::negative;
    int gt_index = -1;
    double gi = 0.0;  ///< IoU with the best-matching ground-truth box
    bool gated = false;
    RegressionOffsets reg_target{};
    CornerSet gt_corners{};
};

struct HeadsConfig {
    int hidden = 128;
};

/// cls / reg / IoU branch outputs for one proposal; logits are raw, sigmoid
/// happens at read-out.
struct HeadsOut {
    nn::Var cls_logit;  ///< 1 x 1
    nn::Var reg;        ///< 1 x 7
    nn::Var iou_logit;  ///< 1 x 1
};

void register_heads(nn::ParamStore& store, int feature_channels, const HeadsConfig& cfg,
                    std::uint64_t global_seed);

/// Three independent 2-layer branches sharing the fused feature row.
HeadsOut heads_forward(nn::Tape& tape, nn::ParamStore& store, nn::Var fused,
                       const HeadsConfig& cfg);

RegressionOffsets offsets_from_row(const nn::Mat& row);

OrientedBox3D decode_refinement(const OrientedBox3D& proposal, const RegressionOffsets& off);

/// Inverse of decode_refinement: offsets that carry the proposal onto target.
RegressionOffsets encode_refinement(const OrientedBox3D& proposal, const OrientedBox3D& target);

/// Differentiable corners (8 x 3) of the box decoded from a 1 x 7 regression
/// row; used by the corner loss.
nn::Var refined_corners_var(nn::Tape& tape, nn::Var reg, const OrientedBox3D& proposal);

/// Max-IoU matching against ground truth with the paper thresholds:
/// positive at G_i >= 0.6, negative at G_i <= 0.45, ignore in between;
/// regression/IoU targets defined at G_i >= 0.55.
std::vector<TargetAssignment> assign_targets(std::span<const Proposal> proposals,
                                             std::span<const OrientedBox3D> gt_boxes,
                                             const LossThresholds& thresholds = {});

struct LossWeights {
    double alpha = 1.0;   ///< classification
    double beta = 1.0;    ///< refinement regression
    double gamma = 20.0;  ///< IoU prediction
    double lambda = 1.0;  ///< auxiliary corner loss
};

struct ProposalPrediction {
    HeadsOut heads;
    OrientedBox3D proposal;
};

struct LossVars {
    nn::Var cls, reg, iou, aux, total;
};

struct LossValues {
    double cls = 0.0, reg = 0.0, iou = 0.0, aux = 0.0, total = 0.0;
};

/// Explicit normalizers, for accumulating a batch loss one proposal at a time.
struct LossCounts {
    int cls = 0;    ///< positives + negatives
    int gated = 0;  ///< proposals with G_i >= gate
};

LossCounts count_loss_terms(std::span<const TargetAssignment> assignments);

/// Builds the four loss terms on the tape. Classification is binary
/// cross-entropy over positives/negatives; the other three are averaged over
/// the N proposals with G_i >= gate and skip everything else entirely.
/// Passing counts overrides the normalizers so that summing single-proposal
/// calls reproduces the whole-batch loss.
LossVars loss_terms(nn::Tape& tape, std::span<const ProposalPrediction> predictions,
                    std::span<const TargetAssignment> assignments,
                    const LossWeights& weights = {},
                    const LossCounts* counts = nullptr);

LossValues loss_values(const nn::Tape& tape, const LossVars& vars);

}  // namespace detref
