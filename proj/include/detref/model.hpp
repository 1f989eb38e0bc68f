#pragma once

#include "detref/aca.hpp"
#include "detref/cge.hpp"
#include "detref/feat.hpp"
#include "detref/heads.hpp"

#include <cstdint>
#include <span>

namespace detref {

/// Full refinement network configuration; ablation flags zero the respective
/// branch at the fusion input without changing parameter shapes.
struct ModelConfig {
    FeatConfig feat;
    AcaConfig aca;
    CgeConfig cge;
    FuseConfig fuse;
    HeadsConfig heads;
    int points_per_proposal = 512;
    double crop_margin = 1.0;
    bool use_aca = true;
    bool use_cge = true;
};

struct Model {
    ModelConfig cfg;
    std::uint64_t seed = 0;
    nn::ParamStore store;

    void init(std::uint64_t global_seed);
};

/// Shared feature path for one proposal: point features, ACA and CGE
/// branches, fusion. coords/descriptors come from sample_proposal_points.
nn::Var proposal_feature(nn::Tape& tape, Model& model, std::span<const Eigen::Vector3d> coords,
                         const nn::Mat& descriptors, const OrientedBox3D& proposal,
                         std::uint64_t stream_seed);

HeadsOut model_heads(nn::Tape& tape, Model& model, nn::Var fused);

}  // namespace detref
