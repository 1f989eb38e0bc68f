#include "detref/cge.hpp"

#include <stdexcept>

namespace detref {

void register_cge(nn::ParamStore& store, const CgeConfig& cfg, std::uint64_t global_seed) {
    nn::register_mlp(store, "cge.mlp", 3, cfg.mlp_widths, global_seed);
    // Conv1D with kernel (d1 x d0 x 8) collapsing the corner axis, stored as
    // a (8*d0) x d1 matrix applied to the row-major flattened embedding.
    store.add("cge.theta", 8 * cfg.d0(), cfg.d1, 8 * cfg.d0(), global_seed);
}

nn::Var cge_forward(nn::Tape& tape, nn::ParamStore& store, const OrientedBox3D& box,
                    const CgeConfig& cfg) {
    const CornerSet corners = decode_corners(box);
    nn::Mat x(8, 3);
    for (int i = 0; i < 8; ++i) {
        x(i, 0) = corners[static_cast<std::size_t>(i)].x();
        x(i, 1) = corners[static_cast<std::size_t>(i)].y();
        x(i, 2) = corners[static_cast<std::size_t>(i)].z();
    }
    const nn::Var embedded =
        nn::mlp_forward(tape, store, "cge.mlp", tape.constant(std::move(x)), cfg.mlp_widths,
                        cfg.linear_embed ? nn::Act::linear : nn::Act::relu);
    const nn::Var flat = tape.reshape_row(embedded);  // 1 x (8*d0), corner-major
    return tape.matmul(flat, tape.param(store, "cge.theta"));
}

void register_fuse(nn::ParamStore& store, int aca_channels, int cge_channels,
                   const FuseConfig& cfg, std::uint64_t global_seed) {
    nn::register_mlp(store, "fuse.mlp", aca_channels + cge_channels, cfg.widths, global_seed);
}

nn::Var fuse_features(nn::Tape& tape, nn::ParamStore& store, nn::Var f_aca, nn::Var f_cge,
                      const FuseConfig& cfg) {
    if (tape.val(f_aca).rows() != 1 || tape.val(f_cge).rows() != 1)
        throw std::invalid_argument("fuse_features: inputs must be single rows");
    return nn::mlp_forward(tape, store, "fuse.mlp", tape.concat_cols(f_aca, f_cge), cfg.widths,
                           nn::Act::relu);
}

}  // namespace detref
