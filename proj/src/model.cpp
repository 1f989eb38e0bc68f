#include "detref/model.hpp"

namespace detref {

void Model::init(std::uint64_t global_seed) {
    seed = global_seed;
    store = nn::ParamStore();
    register_feat(store, cfg.feat, global_seed);
    register_aca(store, cfg.feat.channels(), cfg.aca, global_seed);
    register_cge(store, cfg.cge, global_seed);
    register_fuse(store, cfg.aca.channels(), cfg.cge.d1, cfg.fuse, global_seed);
    register_heads(store, cfg.fuse.channels(), cfg.heads, global_seed);
}

nn::Var proposal_feature(nn::Tape& tape, Model& model, std::span<const Eigen::Vector3d> coords,
                         const nn::Mat& descriptors, const OrientedBox3D& proposal,
                         std::uint64_t stream_seed) {
    const nn::Var desc = tape.constant(descriptors);
    const nn::Var point_feats = feat_forward(tape, model.store, desc, model.cfg.feat);

    nn::Var f_aca;
    if (model.cfg.use_aca) {
        LocalPointCloud cloud;
        cloud.coords.assign(coords.begin(), coords.end());
        cloud.feats = point_feats;
        f_aca = aca_forward(tape, model.store, proposal, cloud, model.cfg.aca, stream_seed);
    } else {
        f_aca = tape.constant(nn::Mat::Zero(1, model.cfg.aca.channels()));
    }

    nn::Var f_cge;
    if (model.cfg.use_cge) {
        f_cge = cge_forward(tape, model.store, proposal, model.cfg.cge);
    } else {
        f_cge = tape.constant(nn::Mat::Zero(1, model.cfg.cge.d1));
    }

    return fuse_features(tape, model.store, f_aca, f_cge, model.cfg.fuse);
}

HeadsOut model_heads(nn::Tape& tape, Model& model, nn::Var fused) {
    return heads_forward(tape, model.store, fused, model.cfg.heads);
}

}  // namespace detref
