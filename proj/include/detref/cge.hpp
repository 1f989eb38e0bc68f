#pragma once

#include "detref/geom.hpp"
#include "detref/nn.hpp"

#include <cstdint>
#include <vector>

namespace detref {

/// Corner geometry encoding: embed the 8 absolute corner coordinates, then
/// contract the corner axis with a learned kernel.
struct CgeConfig {
    std::vector<int> mlp_widths{64};  ///< embedding widths; back() is D0
    int d1 = 128;                     ///< output channels
    bool linear_embed = false;        ///< linear output activation on the embedding

    int d0() const { return mlp_widths.back(); }
};

void register_cge(nn::ParamStore& store, const CgeConfig& cfg, std::uint64_t global_seed);

/// F = contract(MLP(absolute corners)); deliberately not translation
/// invariant (the corners carry absolute position).
nn::Var cge_forward(nn::Tape& tape, nn::ParamStore& store, const OrientedBox3D& box,
                    const CgeConfig& cfg);

/// Final fusion MLP over CAT(F_aca, F_cge).
struct FuseConfig {
    std::vector<int> widths{256};

    int channels() const { return widths.back(); }
};

void register_fuse(nn::ParamStore& store, int aca_channels, int cge_channels,
                   const FuseConfig& cfg, std::uint64_t global_seed);

nn::Var fuse_features(nn::Tape& tape, nn::ParamStore& store, nn::Var f_aca, nn::Var f_cge,
                      const FuseConfig& cfg);

}  // namespace detref
