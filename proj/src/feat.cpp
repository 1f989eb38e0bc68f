#include "detref/feat.hpp"

#include <stdexcept>

namespace detref {

void register_feat(nn::ParamStore& store, const FeatConfig& cfg, std::uint64_t global_seed) {
    nn::register_mlp(store, "feat.loc", 5, cfg.loc_widths, global_seed);
    nn::register_mlp(store, "feat.sem", 3, cfg.sem_widths, global_seed);
    nn::register_mlp(store, "feat.fuse", cfg.loc_widths.back() + cfg.sem_widths.back(),
                     cfg.fuse_widths, global_seed);
}

nn::Var embed_local(nn::Tape& tape, nn::ParamStore& store, nn::Var descriptors,
                    const FeatConfig& cfg) {
    if (tape.val(descriptors).cols() != 5)
        throw std::invalid_argument("embed_local: descriptors must have 5 channels");
    return nn::mlp_forward(tape, store, "feat.loc", descriptors, cfg.loc_widths, nn::Act::relu);
}

nn::Var semantic_encoder(nn::Tape& tape, nn::ParamStore& store, nn::Var coords,
                         const FeatConfig& cfg) {
    if (tape.val(coords).cols() != 3)
        throw std::invalid_argument("semantic_encoder: coords must have 3 channels");
    return nn::mlp_forward(tape, store, "feat.sem", coords, cfg.sem_widths, nn::Act::relu);
}

nn::Var fuse_pointwise(nn::Tape& tape, nn::ParamStore& store, nn::Var f_loc, nn::Var f_sem,
                       const FeatConfig& cfg) {
    if (tape.val(f_loc).rows() != tape.val(f_sem).rows())
        throw std::invalid_argument("fuse_pointwise: row counts must match");
    return nn::mlp_forward(tape, store, "feat.fuse", tape.concat_cols(f_loc, f_sem),
                           cfg.fuse_widths, nn::Act::relu);
}

nn::Var feat_forward(nn::Tape& tape, nn::ParamStore& store, nn::Var descriptors,
                     const FeatConfig& cfg) {
    const nn::Var coords = tape.slice_cols(descriptors, 0, 3);
    const nn::Var f_loc = embed_local(tape, store, descriptors, cfg);
    const nn::Var f_sem = semantic_encoder(tape, store, coords, cfg);
    return fuse_pointwise(tape, store, f_loc, f_sem, cfg);
}

}  // namespace detref
