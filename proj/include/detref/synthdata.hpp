#pragma once

#include "detref/geom.hpp"
#include "detref/heads.hpp"
#include "detref/nn.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace detref {

/// Scene generation knobs. The sensor sits at the origin; boxes are placed in
/// an annulus around it and only faces visible from the origin receive
/// surface points (self-occlusion; no inter-object ray casting).
struct SceneConfig {
    int min_boxes = 2;
    int max_boxes = 4;
    double l_min = 3.0, l_max = 5.0;  // car-like extents
    double w_min = 1.5, w_max = 2.0;
    double h_min = 1.3, h_max = 1.8;
    double r_min = 6.0, r_max = 18.0;  // placement annulus
    double z_min = -0.4, z_max = 0.4;  // center height band
    int points_per_box = 220;
    int clutter_points = 250;
    double clutter_r_min = 4.0, clutter_r_max = 22.0;
    double clutter_z_min = -1.0, clutter_z_max = 1.5;
    double min_gap = 0.25;  // required clearance between boxes
    int max_retries = 200;
};

struct Scene {
    std::uint64_t seed = 0;
    std::vector<Eigen::Vector3d> points;
    std::vector<int> labels;  ///< ground-truth box index, or -1 for clutter
    std::vector<OrientedBox3D> gt;
};

Scene gen_scene(const SceneConfig& cfg, std::uint64_t seed);

/// RPN stand-in: Gaussian perturbations of each ground-truth box.
struct JitterConfig {
    double sigma_center = 0.4;  ///< meters, per axis
    double sigma_size = 0.08;   ///< log-scale
    double sigma_yaw = 0.08;    ///< radians
    int per_gt = 12;
};

std::vector<Proposal> jitter_proposals(std::span<const OrientedBox3D> gt_boxes,
                                       const JitterConfig& cfg, std::uint64_t seed);

/// Proposal-local point set: canonical coordinates plus the 5-channel
/// descriptor rows (canonical xyz, sensor-frame depth, proposal-membership
/// mask). Exactly n rows unless the crop is empty.
struct SampledPoints {
    std::vector<Eigen::Vector3d> coords;
    nn::Mat descriptors;
    int unique_count = 0;

    bool empty() const { return unique_count == 0; }
};

/// Crops by the margin-expanded proposal, samples without replacement above n,
/// repeats cyclically below n. Deterministic given (scene.seed, box).
SampledPoints sample_proposal_points(const Scene& scene, const OrientedBox3D& proposal, int n,
                                     double margin);

/// Seed stream tied to (scene, box); also used for the model's internal FPS
/// so that identical boxes always see identical features.
std::uint64_t proposal_stream_seed(std::uint64_t scene_seed, const OrientedBox3D& box);

void write_scene(const std::string& path, const Scene& scene);
Scene read_scene(const std::string& path);

}  // namespace detref
