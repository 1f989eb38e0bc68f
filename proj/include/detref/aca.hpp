#pragma once

#include "detref/geom.hpp"
#include "detref/pcops.hpp"

#include <cstdint>
#include <vector>

namespace detref {

/// Corner-seeded aggregation with perspective-channel attention.
struct AcaConfig {
    std::vector<SAConfig> sa_levels{
        {128, 0.4, 16, {32, 64}},
        {32, 0.8, 16, {64, 128}},
    };
    int corner_m = 16;
    std::vector<int> corner_mlp{128};
    /// Corner grouping radius as a fraction of the box diagonal.
    double corner_radius_scale = 0.5;
    /// When false, the attention matrix is forced to 1 (equal-merge ablation).
    bool attentive = true;
    /// When false, the 8 aggregation seeds come from FPS instead of corners.
    bool corner_centers = true;

    int channels() const { return corner_mlp.back(); }
};

void register_aca(nn::ParamStore& store, int in_channels, const AcaConfig& cfg,
                  std::uint64_t global_seed);

/// One more SA level whose centers are the 8 canonical corners of the box.
/// The cloud must already be in the box's canonical frame.
nn::Var corner_aggregate(nn::Tape& tape, nn::ParamStore& store, const OrientedBox3D& box,
                         const LocalPointCloud& cloud, const AcaConfig& cfg);

/// Perspective-channel attention matrix M (8 x C), entries in (0, 1):
/// S from the per-perspective max responses, T from the per-channel max
/// responses, M = sigmoid(S * T).
nn::Var perspective_attention(nn::Tape& tape, nn::ParamStore& store, nn::Var f_inv,
                              const AcaConfig& cfg);

/// Full module: K SA levels, corner aggregation, attention reweighting, and
/// the sum over the eight perspectives. Returns a 1 x C row.
nn::Var aca_forward(nn::Tape& tape, nn::ParamStore& store, const OrientedBox3D& box,
                    const LocalPointCloud& cloud, const AcaConfig& cfg, std::uint64_t fps_seed);

}  // namespace detref
