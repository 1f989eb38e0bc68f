#pragma once

#include "detref/nn.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace detref {

/// Point coordinates plus per-point feature rows living on a tape.
struct LocalPointCloud {
    std::vector<Eigen::Vector3d> coords;
    nn::Var feats;  ///< N x C, rows aligned with coords
};

/// One set-abstraction level: sample n centers, group m neighbors within
/// radius, embed with a shared MLP, max-pool per group.
struct SAConfig {
    int n = 0;
    double radius = 0.0;
    int m = 0;
    std::vector<int> mlp_widths;
};

/// Furthest-point sampling. The seed fixes the starting index (seed % N);
/// every later pick maximizes the min distance to the picked set, ties to the
/// lowest index.
std::vector<int> farthest_point_sampling(std::span<const Eigen::Vector3d> coords, int k,
                                         std::uint64_t seed);

/// Up to m neighbor indices per center with strict distance < radius, in scan
/// order. Short groups are filled by repeating the first found index; a group
/// with no neighbor stays empty.
std::vector<std::vector<int>> ball_query(std::span<const Eigen::Vector3d> centers,
                                         std::span<const Eigen::Vector3d> coords, double radius,
                                         int m);

/// Stacks every group into rows CAT(x_j - x_i, f_j) of shape
/// (centers * m) x (3 + C); empty groups contribute all-zero rows.
nn::Var group_and_normalize(nn::Tape& tape, std::span<const Eigen::Vector3d> centers,
                            std::span<const Eigen::Vector3d> coords, nn::Var feats,
                            const std::vector<std::vector<int>>& groups, int m);

/// Full SA step. Centers come from FPS unless sampled_centers is given
/// (corner aggregation passes the box corners). Parameters live under
/// "<prefix>.<layer>.{W,b}". Output has cfg.n rows (or sampled_centers.size())
/// and cfg.mlp_widths.back() channels.
LocalPointCloud set_abstraction(nn::Tape& tape, nn::ParamStore& store, const std::string& prefix,
                                const LocalPointCloud& cloud, const SAConfig& cfg,
                                std::uint64_t fps_seed,
                                std::optional<std::vector<Eigen::Vector3d>> sampled_centers =
                                    std::nullopt);

/// Registers the SA level's MLP for an input cloud with `in_channels` features.
void register_set_abstraction(nn::ParamStore& store, const std::string& prefix, int in_channels,
                              const SAConfig& cfg, std::uint64_t global_seed);

}  // namespace detref
