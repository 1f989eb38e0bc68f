#include "detref/aca.hpp"

#include "detref/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace detref {

void register_aca(nn::ParamStore& store, int in_channels, const AcaConfig& cfg,
                  std::uint64_t global_seed) {
    int c = in_channels;
    for (std::size_t k = 0; k < cfg.sa_levels.size(); ++k) {
        const std::string prefix = "aca.sa" + std::to_string(k + 1);
        register_set_abstraction(store, prefix, c, cfg.sa_levels[k], global_seed);
        c = cfg.sa_levels[k].mlp_widths.back();
    }
    SAConfig corner;
    corner.mlp_widths = cfg.corner_mlp;
    register_set_abstraction(store, "aca.corner", c, corner, global_seed);

    const int out = cfg.channels();
    // Reduction ratio r = 1: square weight matrices, no biases.
    store.add("aca.attn.wp1", 8, 8, 8, global_seed);
    store.add("aca.attn.wp2", 8, 8, 8, global_seed);
    store.add("aca.attn.wc1", out, out, out, global_seed);
    store.add("aca.attn.wc2", out, out, out, global_seed);
}

nn::Var corner_aggregate(nn::Tape& tape, nn::ParamStore& store, const OrientedBox3D& box,
                         const LocalPointCloud& cloud, const AcaConfig& cfg) {
    OrientedBox3D canonical = box;
    canonical.cx = canonical.cy = canonical.cz = 0.0;
    canonical.yaw = 0.0;
    const CornerSet corners = decode_corners(canonical);

    SAConfig level;
    level.n = 8;
    level.m = cfg.corner_m;
    level.mlp_widths = cfg.corner_mlp;
    const double diagonal = std::sqrt(box.l * box.l + box.w * box.w + box.h * box.h);
    level.radius = cfg.corner_radius_scale * diagonal;

    std::vector<Eigen::Vector3d> centers(corners.begin(), corners.end());
    return set_abstraction(tape, store, "aca.corner", cloud, level, 0, std::move(centers)).feats;
}

nn::Var perspective_attention(nn::Tape& tape, nn::ParamStore& store, nn::Var f_inv,
                              const AcaConfig& cfg) {
    const auto& fv = tape.val(f_inv);
    if (fv.rows() != 8 || fv.cols() != cfg.channels())
        throw std::invalid_argument("perspective_attention: F_inv must be 8 x C");

    const nn::Var e = tape.row_max(f_inv);                       // 8 x 1
    const nn::Var u = tape.col_max(f_inv);                       // 1 x C
    const nn::Var wp1 = tape.param(store, "aca.attn.wp1");
    const nn::Var wp2 = tape.param(store, "aca.attn.wp2");
    const nn::Var s = tape.matmul(wp2, tape.relu(tape.matmul(wp1, e)));        // 8 x 1
    const nn::Var wc1 = tape.param(store, "aca.attn.wc1");
    const nn::Var wc2 = tape.param(store, "aca.attn.wc2");
    const nn::Var t_t = tape.matmul(wc2, tape.relu(tape.matmul(wc1, tape.transpose(u))));
    return tape.sigmoid(tape.matmul(s, tape.transpose(t_t)));    // 8 x C
}

nn::Var aca_forward(nn::Tape& tape, nn::ParamStore& store, const OrientedBox3D& box,
                    const LocalPointCloud& cloud, const AcaConfig& cfg, std::uint64_t fps_seed) {
    LocalPointCloud current = cloud;
    for (std::size_t k = 0; k < cfg.sa_levels.size(); ++k) {
        const std::string prefix = "aca.sa" + std::to_string(k + 1);
        current = set_abstraction(tape, store, prefix, current, cfg.sa_levels[k],
                                  mix_u64(fps_seed, k));
    }

    nn::Var f_inv;
    if (cfg.corner_centers) {
        f_inv = corner_aggregate(tape, store, box, current, cfg);
    } else {
        // "Random" aggregation ablation: 8 FPS seeds instead of the corners.
        SAConfig level;
        level.n = 8;
        level.m = cfg.corner_m;
        level.mlp_widths = cfg.corner_mlp;
        const double diagonal = std::sqrt(box.l * box.l + box.w * box.w + box.h * box.h);
        level.radius = cfg.corner_radius_scale * diagonal;
        f_inv = set_abstraction(tape, store, "aca.corner", current, level,
                                mix_u64(fps_seed, cfg.sa_levels.size()))
                    .feats;
    }

    if (!cfg.attentive) return tape.sum_rows(f_inv);
    const nn::Var m = perspective_attention(tape, store, f_inv, cfg);
    return tape.sum_rows(tape.cmul(m, f_inv));
}

}  // namespace detref
