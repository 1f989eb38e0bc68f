#include "detref/pcops.hpp"

#include <limits>
#include <stdexcept>

namespace detref {

std::vector<int> farthest_point_sampling(std::span<const Eigen::Vector3d> coords, int k,
                                         std::uint64_t seed) {
    const int n = static_cast<int>(coords.size());
    if (k > n) throw std::invalid_argument("farthest_point_sampling: k > N, pad callers first");
    if (k <= 0) throw std::invalid_argument("farthest_point_sampling: k must be >= 1");

    std::vector<int> picked;
    picked.reserve(static_cast<std::size_t>(k));
    const int start = static_cast<int>(seed % static_cast<std::uint64_t>(n));
    picked.push_back(start);

    std::vector<double> min_sq(static_cast<std::size_t>(n),
                               std::numeric_limits<double>::infinity());
    for (int step = 1; step < k; ++step) {
        const Eigen::Vector3d& last = coords[static_cast<std::size_t>(picked.back())];
        int best = -1;
        double best_d = -1.0;
        for (int i = 0; i < n; ++i) {
            const double d = (coords[static_cast<std::size_t>(i)] - last).squaredNorm();
            if (d < min_sq[static_cast<std::size_t>(i)]) min_sq[static_cast<std::size_t>(i)] = d;
            if (min_sq[static_cast<std::size_t>(i)] > best_d) {
                best_d = min_sq[static_cast<std::size_t>(i)];
                best = i;
            }
        }
        picked.push_back(best);
    }
    return picked;
}

std::vector<std::vector<int>> ball_query(std::span<const Eigen::Vector3d> centers,
                                         std::span<const Eigen::Vector3d> coords, double radius,
                                         int m) {
    if (radius <= 0.0) throw std::invalid_argument("ball_query: radius must be > 0");
    if (m <= 0) throw std::invalid_argument("ball_query: m must be >= 1");
    const double r_sq = radius * radius;
    std::vector<std::vector<int>> groups(centers.size());
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        auto& group = groups[ci];
        for (std::size_t j = 0; j < coords.size() && static_cast<int>(group.size()) < m; ++j) {
            if ((coords[j] - centers[ci]).squaredNorm() < r_sq)  // strict inequality
                group.push_back(static_cast<int>(j));
        }
        if (!group.empty()) {
            const int first = group.front();
            while (static_cast<int>(group.size()) < m) group.push_back(first);
        }
    }
    return groups;
}

nn::Var group_and_normalize(nn::Tape& tape, std::span<const Eigen::Vector3d> centers,
                            std::span<const Eigen::Vector3d> coords, nn::Var feats,
                            const std::vector<std::vector<int>>& groups, int m) {
    if (groups.size() != centers.size())
        throw std::invalid_argument("group_and_normalize: groups/centers mismatch");
    const std::size_t rows = centers.size() * static_cast<std::size_t>(m);
    nn::Mat rel = nn::Mat::Zero(static_cast<Eigen::Index>(rows), 3);
    std::vector<int> flat(rows, -1);
    for (std::size_t ci = 0; ci < centers.size(); ++ci) {
        const auto& group = groups[ci];
        if (group.empty()) continue;  // all-zero rows
        if (static_cast<int>(group.size()) != m)
            throw std::invalid_argument("group_and_normalize: group size must be m or 0");
        for (int j = 0; j < m; ++j) {
            const std::size_t r = ci * static_cast<std::size_t>(m) + static_cast<std::size_t>(j);
            const Eigen::Vector3d d = coords[static_cast<std::size_t>(group[static_cast<std::size_t>(j)])] - centers[ci];
            rel(static_cast<Eigen::Index>(r), 0) = d.x();
            rel(static_cast<Eigen::Index>(r), 1) = d.y();
            rel(static_cast<Eigen::Index>(r), 2) = d.z();
            flat[r] = group[static_cast<std::size_t>(j)];
        }
    }
    return tape.concat_cols(tape.constant(std::move(rel)), tape.gather_rows(feats, std::move(flat)));
}

void register_set_abstraction(nn::ParamStore& store, const std::string& prefix, int in_channels,
                              const SAConfig& cfg, std::uint64_t global_seed) {
    nn::register_mlp(store, prefix, 3 + in_channels, cfg.mlp_widths, global_seed);
}

LocalPointCloud set_abstraction(nn::Tape& tape, nn::ParamStore& store, const std::string& prefix,
                                const LocalPointCloud& cloud, const SAConfig& cfg,
                                std::uint64_t fps_seed,
                                std::optional<std::vector<Eigen::Vector3d>> sampled_centers) {
    std::vector<Eigen::Vector3d> centers;
    if (sampled_centers) {
        centers = std::move(*sampled_centers);
    } else {
        const std::vector<int> idx = farthest_point_sampling(cloud.coords, cfg.n, fps_seed);
        centers.reserve(idx.size());
        for (const int i : idx) centers.push_back(cloud.coords[static_cast<std::size_t>(i)]);
    }
    const auto groups = ball_query(centers, cloud.coords, cfg.radius, cfg.m);
    const nn::Var blocks = group_and_normalize(tape, centers, cloud.coords, cloud.feats, groups, cfg.m);
    const nn::Var embedded = nn::mlp_forward(tape, store, prefix, blocks, cfg.mlp_widths, nn::Act::relu);
    LocalPointCloud out;
    out.feats = tape.group_row_max(embedded, static_cast<int>(centers.size()));
    out.coords = std::move(centers);
    return out;
}

}  // namespace detref
