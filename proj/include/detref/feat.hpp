#pragma once

#include "detref/nn.hpp"

#include <cstdint>
#include <vector>

namespace detref {

/// Widths of the point-wise embedding stacks. The fused output width
/// (fuse_widths.back()) is the point feature channel count C0.
struct FeatConfig {
    std::vector<int> loc_widths{64, 128};
    std::vector<int> sem_widths{64, 128};
    std::vector<int> fuse_widths{128};

    int channels() const { return fuse_widths.back(); }
};

void register_feat(nn::ParamStore& store, const FeatConfig& cfg, std::uint64_t global_seed);

/// Embeds the 5-channel descriptor rows CAT(canonical xyz, depth, mask).
nn::Var embed_local(nn::Tape& tape, nn::ParamStore& store, nn::Var descriptors,
                    const FeatConfig& cfg);

/// Stand-in semantic feature from the raw canonical coordinates, trained
/// jointly with everything else.
nn::Var semantic_encoder(nn::Tape& tape, nn::ParamStore& store, nn::Var coords,
                         const FeatConfig& cfg);

/// Point-wise fusion of the local embedding with the semantic feature.
nn::Var fuse_pointwise(nn::Tape& tape, nn::ParamStore& store, nn::Var f_loc, nn::Var f_sem,
                       const FeatConfig& cfg);

/// descriptors (n x 5) -> point feature rows (n x C0).
nn::Var feat_forward(nn::Tape& tape, nn::ParamStore& store, nn::Var descriptors,
                     const FeatConfig& cfg);

}  // namespace detref
