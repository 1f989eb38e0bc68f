#include "detref/heads.hpp"

#include <cmath>
#include <stdexcept>

namespace detref {

void register_heads(nn::ParamStore& store, int feature_channels, const HeadsConfig& cfg,
                    std::uint64_t global_seed) {
    const std::vector<int> cls{cfg.hidden, 1};
    const std::vector<int> reg{cfg.hidden, 7};
    const std::vector<int> iou{cfg.hidden, 1};
    nn::register_mlp(store, "heads.cls", feature_channels, cls, global_seed);
    nn::register_mlp(store, "heads.reg", feature_channels, reg, global_seed);
    nn::register_mlp(store, "heads.iou", feature_channels, iou, global_seed);
}

HeadsOut heads_forward(nn::Tape& tape, nn::ParamStore& store, nn::Var fused,
                       const HeadsConfig& cfg) {
    const std::vector<int> cls{cfg.hidden, 1};
    const std::vector<int> reg{cfg.hidden, 7};
    const std::vector<int> iou{cfg.hidden, 1};
    HeadsOut out;
    out.cls_logit = nn::mlp_forward(tape, store, "heads.cls", fused, cls, nn::Act::linear);
    out.reg = nn::mlp_forward(tape, store, "heads.reg", fused, reg, nn::Act::linear);
    out.iou_logit = nn::mlp_forward(tape, store, "heads.iou", fused, iou, nn::Act::linear);
    return out;
}

RegressionOffsets offsets_from_row(const nn::Mat& row) {
    if (row.rows() != 1 || row.cols() != 7)
        throw std::invalid_argument("offsets_from_row: expected 1 x 7");
    return {row(0, 0), row(0, 1), row(0, 2), row(0, 3), row(0, 4), row(0, 5), row(0, 6)};
}

OrientedBox3D decode_refinement(const OrientedBox3D& proposal, const RegressionOffsets& off) {
    validate_box(proposal);
    const double d = bev_diagonal(proposal);
    const double c = std::cos(proposal.yaw);
    const double s = std::sin(proposal.yaw);
    OrientedBox3D out = proposal;
    out.cx += d * (c * off.dx - s * off.dy);
    out.cy += d * (s * off.dx + c * off.dy);
    out.cz += d * off.dz;
    out.l *= std::exp(off.dl);
    out.w *= std::exp(off.dw);
    out.h *= std::exp(off.dh);
    out.yaw = wrap_angle(proposal.yaw + off.dyaw);
    return out;
}

RegressionOffsets encode_refinement(const OrientedBox3D& proposal, const OrientedBox3D& target) {
    validate_box(proposal);
    validate_box(target);
    const double d = bev_diagonal(proposal);
    const double c = std::cos(proposal.yaw);
    const double s = std::sin(proposal.yaw);
    const double ex = target.cx - proposal.cx;
    const double ey = target.cy - proposal.cy;
    RegressionOffsets off;
    off.dx = (c * ex + s * ey) / d;
    off.dy = (-s * ex + c * ey) / d;
    off.dz = (target.cz - proposal.cz) / d;
    off.dl = std::log(target.l / proposal.l);
    off.dw = std::log(target.w / proposal.w);
    off.dh = std::log(target.h / proposal.h);
    off.dyaw = wrap_angle(target.yaw - proposal.yaw);
    return off;
}

nn::Var refined_corners_var(nn::Tape& tape, nn::Var reg, const OrientedBox3D& proposal) {
    if (tape.val(reg).rows() != 1 || tape.val(reg).cols() != 7)
        throw std::invalid_argument("refined_corners_var: reg must be 1 x 7");
    const double d = bev_diagonal(proposal);
    const double c = std::cos(proposal.yaw);
    const double s = std::sin(proposal.yaw);

    // World-frame center shift is linear in the offsets: (1x3) * d*R^T.
    nn::Mat rot(3, 3);
    rot << c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0;
    rot *= d;
    nn::Mat center0(1, 3);
    center0 << proposal.cx, proposal.cy, proposal.cz;
    const nn::Var center =
        tape.add(tape.constant(center0), tape.matmul(tape.slice_cols(reg, 0, 3), tape.constant(rot)));

    nn::Mat sizes0(1, 3);
    sizes0 << proposal.l, proposal.w, proposal.h;
    const nn::Var half =
        tape.scale(tape.cmul(tape.constant(sizes0), tape.exp(tape.slice_cols(reg, 3, 3))), 0.5);

    const nn::Var yaw = tape.add(tape.scalar(proposal.yaw), tape.slice_cols(reg, 6, 1));
    const nn::Var cy = tape.cos(yaw);
    const nn::Var sy = tape.sin(yaw);

    const nn::Var cx = tape.slice_cols(center, 0, 1);
    const nn::Var cyv = tape.slice_cols(center, 1, 1);
    const nn::Var cz = tape.slice_cols(center, 2, 1);
    const nn::Var hl = tape.slice_cols(half, 0, 1);
    const nn::Var hw = tape.slice_cols(half, 1, 1);
    const nn::Var hh = tape.slice_cols(half, 2, 1);

    std::vector<nn::Var> rows;
    rows.reserve(8);
    for (int i = 0; i < 8; ++i) {
        const double sx = (i & 4) ? 1.0 : -1.0;
        const double syn = (i & 2) ? 1.0 : -1.0;
        const double sz = (i & 1) ? 1.0 : -1.0;
        const nn::Var lx = tape.scale(hl, sx);
        const nn::Var ly = tape.scale(hw, syn);
        const nn::Var lz = tape.scale(hh, sz);
        const nn::Var x = tape.add(cx, tape.sub(tape.cmul(cy, lx), tape.cmul(sy, ly)));
        const nn::Var y = tape.add(cyv, tape.add(tape.cmul(sy, lx), tape.cmul(cy, ly)));
        const nn::Var z = tape.add(cz, lz);
        rows.push_back(tape.concat_cols(tape.concat_cols(x, y), z));
    }
    return tape.concat_rows(rows);
}

std::vector<TargetAssignment> assign_targets(std::span<const Proposal> proposals,
                                             std::span<const OrientedBox3D> gt_boxes,
                                             const LossThresholds& thresholds) {
    std::vector<TargetAssignment> out;
    out.reserve(proposals.size());
    for (const Proposal& proposal : proposals) {
        TargetAssignment a;
        for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
            const double iou = iou_3d(proposal.box, gt_boxes[g]);
            if (iou > a.gi || a.gt_index < 0) {
                a.gi = iou;
                a.gt_index = static_cast<int>(g);
            }
        }
        if (gt_boxes.empty()) a.gt_index = -1;
        if (a.gi >= thresholds.positive)
            a.label = MatchLabel::positive;
        else if (a.gi <= thresholds.negative)
            a.label = MatchLabel::negative;
        else
            a.label = MatchLabel::ignore;
        a.gated = a.gt_index >= 0 && a.gi >= thresholds.gate;
        if (a.gated) {
            const OrientedBox3D& gt = gt_boxes[static_cast<std::size_t>(a.gt_index)];
            a.reg_target = encode_refinement(proposal.box, gt);
            a.gt_corners = decode_corners(gt);
        }
        out.push_back(a);
    }
    return out;
}

namespace {

nn::Var sum_or_zero(nn::Tape& tape, const std::vector<nn::Var>& terms) {
    if (terms.empty()) return tape.scalar(0.0);
    nn::Var acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
    return acc;
}

}  // namespace

LossCounts count_loss_terms(std::span<const TargetAssignment> assignments) {
    LossCounts counts;
    for (const TargetAssignment& a : assignments) {
        counts.cls += a.label != MatchLabel::ignore;
        counts.gated += a.gated;
    }
    return counts;
}

LossVars loss_terms(nn::Tape& tape, std::span<const ProposalPrediction> predictions,
                    std::span<const TargetAssignment> assignments, const LossWeights& weights,
                    const LossCounts* counts) {
    if (predictions.size() != assignments.size())
        throw std::invalid_argument("loss_terms: predictions/assignments size mismatch");

    std::vector<nn::Var> cls_terms;
    std::vector<nn::Var> reg_terms;
    std::vector<nn::Var> iou_terms;
    std::vector<nn::Var> aux_terms;

    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const ProposalPrediction& p = predictions[i];
        const TargetAssignment& a = assignments[i];
        if (a.label != MatchLabel::ignore) {
            nn::Mat target(1, 1);
            target(0, 0) = a.label == MatchLabel::positive ? 1.0 : 0.0;
            cls_terms.push_back(tape.bce_with_logits(p.heads.cls_logit, std::move(target)));
        }
        if (!a.gated) continue;

        nn::Mat reg_target(1, 7);
        reg_target << a.reg_target.dx, a.reg_target.dy, a.reg_target.dz, a.reg_target.dl,
            a.reg_target.dw, a.reg_target.dh, a.reg_target.dyaw;
        reg_terms.push_back(tape.sum_all(tape.smooth_l1(p.heads.reg, std::move(reg_target))));

        nn::Mat gi(1, 1);
        gi(0, 0) = a.gi;
        iou_terms.push_back(
            tape.sum_all(tape.smooth_l1(tape.sigmoid(p.heads.iou_logit), std::move(gi))));

        nn::Mat gt_corners(8, 3);
        for (int k = 0; k < 8; ++k) {
            gt_corners(k, 0) = a.gt_corners[static_cast<std::size_t>(k)].x();
            gt_corners(k, 1) = a.gt_corners[static_cast<std::size_t>(k)].y();
            gt_corners(k, 2) = a.gt_corners[static_cast<std::size_t>(k)].z();
        }
        const nn::Var corners = refined_corners_var(tape, p.heads.reg, p.proposal);
        aux_terms.push_back(tape.sum_all(
            tape.rows_l2norm(tape.sub(corners, tape.constant(std::move(gt_corners))))));
    }

    const double n_cls =
        counts ? static_cast<double>(counts->cls) : static_cast<double>(cls_terms.size());
    const double n_gate =
        counts ? static_cast<double>(counts->gated) : static_cast<double>(reg_terms.size());
    LossVars vars;
    vars.cls = cls_terms.empty() ? tape.scalar(0.0)
                                 : tape.scale(sum_or_zero(tape, cls_terms), 1.0 / n_cls);
    vars.reg = reg_terms.empty() ? tape.scalar(0.0)
                                 : tape.scale(sum_or_zero(tape, reg_terms), 1.0 / n_gate);
    vars.iou = iou_terms.empty() ? tape.scalar(0.0)
                                 : tape.scale(sum_or_zero(tape, iou_terms), 1.0 / n_gate);
    vars.aux = aux_terms.empty() ? tape.scalar(0.0)
                                 : tape.scale(sum_or_zero(tape, aux_terms), 1.0 / n_gate);
    vars.total = tape.add(tape.add(tape.scale(vars.cls, weights.alpha),
                                   tape.scale(vars.reg, weights.beta)),
                          tape.add(tape.scale(vars.iou, weights.gamma),
                                   tape.scale(vars.aux, weights.lambda)));
    return vars;
}

LossValues loss_values(const nn::Tape& tape, const LossVars& vars) {
    LossValues v;
    v.cls = tape.val(vars.cls)(0, 0);
    v.reg = tape.val(vars.reg)(0, 0);
    v.iou = tape.val(vars.iou)(0, 0);
    v.aux = tape.val(vars.aux)(0, 0);
    v.total = tape.val(vars.total)(0, 0);
    return v;
}

}  // namespace detref
