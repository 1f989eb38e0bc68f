#include "detref/synthdata.hpp"

#include "detref/rng.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace detref {

namespace {

struct Face {
    int axis;     // 0 x, 1 y, 2 z
    double sign;  // +1 or -1
    double area;
};

Eigen::Vector3d face_normal(const OrientedBox3D& box, const Face& f) {
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    n[f.axis] = f.sign;
    return {c * n.x() - s * n.y(), s * n.x() + c * n.y(), n.z()};
}

Eigen::Vector3d face_center(const OrientedBox3D& box, const Face& f) {
    Eigen::Vector3d canonical = Eigen::Vector3d::Zero();
    const double ext[3] = {box.l, box.w, box.h};
    canonical[f.axis] = 0.5 * f.sign * ext[f.axis];
    return sensor_point(canonical, box);
}

bool face_visible_from_origin(const OrientedBox3D& box, const Face& f) {
    const Eigen::Vector3d center = face_center(box, f);
    return face_normal(box, f).dot(-center) > 0.0;
}

Eigen::Vector3d sample_on_face(const OrientedBox3D& box, const Face& f, Rng& rng) {
    const double ext[3] = {box.l, box.w, box.h};
    Eigen::Vector3d canonical;
    canonical[f.axis] = 0.5 * f.sign * ext[f.axis];
    const int a = (f.axis + 1) % 3;
    const int b = (f.axis + 2) % 3;
    canonical[a] = rng.uniform(-0.5 * ext[a], 0.5 * ext[a]);
    canonical[b] = rng.uniform(-0.5 * ext[b], 0.5 * ext[b]);
    return sensor_point(canonical, box);
}

}  // namespace

Scene gen_scene(const SceneConfig& cfg, std::uint64_t seed) {
    if (cfg.r_min > cfg.r_max || cfg.clutter_r_min > cfg.clutter_r_max)
        throw std::invalid_argument("gen_scene: annulus inner radius exceeds outer radius");
    if (cfg.min_boxes < 0 || cfg.max_boxes < cfg.min_boxes)
        throw std::invalid_argument("gen_scene: invalid box count range");

    Rng rng(mix_u64(seed, fnv1a("scene")));
    Scene scene;
    scene.seed = seed;

    const int n_boxes = rng.uniform_int(cfg.min_boxes, cfg.max_boxes);
    for (int b = 0; b < n_boxes; ++b) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
            OrientedBox3D box;
            const double radius = std::sqrt(rng.uniform(cfg.r_min * cfg.r_min, cfg.r_max * cfg.r_max));
            const double angle = rng.uniform(-M_PI, M_PI);
            box.cx = radius * std::cos(angle);
            box.cy = radius * std::sin(angle);
            box.cz = rng.uniform(cfg.z_min, cfg.z_max);
            box.l = rng.uniform(cfg.l_min, cfg.l_max);
            box.w = rng.uniform(cfg.w_min, cfg.w_max);
            box.h = rng.uniform(cfg.h_min, cfg.h_max);
            box.yaw = wrap_angle(rng.uniform(-M_PI, M_PI));
            bool clear = true;
            for (const auto& other : scene.gt) {
                if (iou_3d(expand_box(box, cfg.min_gap), expand_box(other, cfg.min_gap)) > 0.0) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                scene.gt.push_back(box);
                placed = true;
            }
        }
        if (!placed)
            throw std::runtime_error("gen_scene: box placement failed after bounded retries");
    }

    for (std::size_t b = 0; b < scene.gt.size(); ++b) {
        const OrientedBox3D& box = scene.gt[b];
        std::vector<Face> visible;
        double total_area = 0.0;
        const double areas[3] = {box.w * box.h, box.l * box.h, box.l * box.w};
        for (int axis = 0; axis < 3; ++axis) {
            for (const double sign : {-1.0, 1.0}) {
                Face f{axis, sign, areas[axis]};
                if (face_visible_from_origin(box, f)) {
                    total_area += f.area;
                    visible.push_back(f);
                }
            }
        }
        if (visible.empty()) continue;  // cannot happen outside the annulus
        for (int p = 0; p < cfg.points_per_box; ++p) {
            double pick = rng.uniform(0.0, total_area);
            std::size_t fi = 0;
            while (fi + 1 < visible.size() && pick > visible[fi].area) {
                pick -= visible[fi].area;
                ++fi;
            }
            scene.points.push_back(sample_on_face(box, visible[fi], rng));
            scene.labels.push_back(static_cast<int>(b));
        }
    }

    for (int p = 0; p < cfg.clutter_points; ++p) {
        for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
            const double radius = std::sqrt(
                rng.uniform(cfg.clutter_r_min * cfg.clutter_r_min, cfg.clutter_r_max * cfg.clutter_r_max));
            const double angle = rng.uniform(-M_PI, M_PI);
            const Eigen::Vector3d point(radius * std::cos(angle), radius * std::sin(angle),
                                        rng.uniform(cfg.clutter_z_min, cfg.clutter_z_max));
            bool inside_any = false;
            for (const auto& box : scene.gt) {
                if (point_in_box(point, expand_box(box, 0.05))) {
                    inside_any = true;
                    break;
                }
            }
            if (!inside_any) {
                scene.points.push_back(point);
                scene.labels.push_back(-1);
                break;
            }
        }
    }

    return scene;
}

std::vector<Proposal> jitter_proposals(std::span<const OrientedBox3D> gt_boxes,
                                       const JitterConfig& cfg, std::uint64_t seed) {
    Rng rng(mix_u64(seed, fnv1a("jitter")));
    std::vector<Proposal> proposals;
    proposals.reserve(gt_boxes.size() * static_cast<std::size_t>(cfg.per_gt));
    int id = 0;
    for (const OrientedBox3D& gt : gt_boxes) {
        for (int k = 0; k < cfg.per_gt; ++k) {
            OrientedBox3D box = gt;
            box.cx += rng.normal(0.0, cfg.sigma_center);
            box.cy += rng.normal(0.0, cfg.sigma_center);
            box.cz += rng.normal(0.0, cfg.sigma_center);
            box.l *= std::exp(rng.normal(0.0, cfg.sigma_size));
            box.w *= std::exp(rng.normal(0.0, cfg.sigma_size));
            box.h *= std::exp(rng.normal(0.0, cfg.sigma_size));
            box.yaw = wrap_angle(box.yaw + rng.normal(0.0, cfg.sigma_yaw));
            proposals.push_back({box, id++});
        }
    }
    return proposals;
}

std::uint64_t proposal_stream_seed(std::uint64_t scene_seed, const OrientedBox3D& box) {
    const double fields[7] = {box.cx, box.cy, box.cz, box.l, box.w, box.h, box.yaw};
    char bytes[sizeof(fields)];
    std::memcpy(bytes, fields, sizeof(fields));
    return mix_u64(scene_seed, fnv1a(std::string_view(bytes, sizeof(bytes))));
}

SampledPoints sample_proposal_points(const Scene& scene, const OrientedBox3D& proposal, int n,
                                     double margin) {
    if (n <= 0) throw std::invalid_argument("sample_proposal_points: n must be >= 1");
    const OrientedBox3D expanded = expand_box(proposal, margin);

    std::vector<int> inside;
    for (std::size_t i = 0; i < scene.points.size(); ++i)
        if (point_in_box(scene.points[i], expanded)) inside.push_back(static_cast<int>(i));

    SampledPoints out;
    out.unique_count = static_cast<int>(inside.size());
    if (inside.empty()) return out;

    std::vector<int> chosen;
    chosen.reserve(static_cast<std::size_t>(n));
    if (out.unique_count > n) {
        // Sample without replacement, then restore scan order.
        Rng rng(proposal_stream_seed(scene.seed, proposal));
        std::vector<int> pool = inside;
        for (int k = 0; k < n; ++k) {
            const int j = k + static_cast<int>(rng.next_u64() %
                                               static_cast<std::uint64_t>(pool.size() - static_cast<std::size_t>(k)));
            std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
            chosen.push_back(pool[static_cast<std::size_t>(k)]);
        }
        std::sort(chosen.begin(), chosen.end());
    } else {
        for (int k = 0; k < n; ++k)
            chosen.push_back(inside[static_cast<std::size_t>(k % out.unique_count)]);
    }

    out.coords.reserve(chosen.size());
    out.descriptors = nn::Mat(n, 5);
    for (int k = 0; k < n; ++k) {
        const Eigen::Vector3d& sensor = scene.points[static_cast<std::size_t>(chosen[static_cast<std::size_t>(k)])];
        const Eigen::Vector3d canonical = canonical_point(sensor, proposal);
        out.coords.push_back(canonical);
        out.descriptors(k, 0) = canonical.x();
        out.descriptors(k, 1) = canonical.y();
        out.descriptors(k, 2) = canonical.z();
        out.descriptors(k, 3) = sensor.norm();  // depth before the canonical transform
        out.descriptors(k, 4) = point_in_box(sensor, proposal) ? 1.0 : 0.0;
    }
    return out;
}

void write_scene(const std::string& path, const Scene& scene) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_scene: cannot open " + path);
    out << "seed " << scene.seed << "\n";
    out << "points " << scene.points.size() << "\n";
    out << "boxes " << scene.gt.size() << "\n";
    char line[160];
    for (std::size_t i = 0; i < scene.points.size(); ++i) {
        std::snprintf(line, sizeof(line), "%.9f %.9f %.9f %d\n", scene.points[i].x(),
                      scene.points[i].y(), scene.points[i].z(), scene.labels[i]);
        out << line;
    }
    for (const OrientedBox3D& box : scene.gt) {
        std::snprintf(line, sizeof(line), "%.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", box.cx, box.cy,
                      box.cz, box.l, box.w, box.h, box.yaw);
        out << line;
    }
    if (!out) throw std::runtime_error("write_scene: write failed for " + path);
}

Scene read_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_scene: cannot open " + path);
    std::string key;
    Scene scene;
    std::size_t n_points = 0, n_boxes = 0;
    if (!(in >> key >> scene.seed) || key != "seed")
        throw std::runtime_error("read_scene: bad header in " + path);
    if (!(in >> key >> n_points) || key != "points")
        throw std::runtime_error("read_scene: bad header in " + path);
    if (!(in >> key >> n_boxes) || key != "boxes")
        throw std::runtime_error("read_scene: bad header in " + path);
    scene.points.reserve(n_points);
    scene.labels.reserve(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        double x, y, z;
        int label;
        if (!(in >> x >> y >> z >> label))
            throw std::runtime_error("read_scene: truncated points in " + path);
        scene.points.emplace_back(x, y, z);
        scene.labels.push_back(label);
    }
    for (std::size_t i = 0; i < n_boxes; ++i) {
        OrientedBox3D box;
        if (!(in >> box.cx >> box.cy >> box.cz >> box.l >> box.w >> box.h >> box.yaw))
            throw std::runtime_error("read_scene: truncated boxes in " + path);
        scene.gt.push_back(box);
    }
    return scene;
}

}  // namespace detref
