#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace detref {

/// 7-DOF oriented box: center, extents along the local axes, yaw about +z
/// (counter-clockwise when seen from above). No pitch/roll.
struct OrientedBox3D {
    double cx = 0.0;
    double cy = 0.0;
    double cz = 0.0;
    double l = 1.0;  ///< extent along local x
    double w = 1.0;  ///< extent along local y
    double h = 1.0;  ///< extent along local z
    double yaw = 0.0;

    bool operator==(const OrientedBox3D&) const = default;
};

/// Eight corners in fixed index order: bit 2 -> x sign, bit 1 -> y sign,
/// bit 0 -> z sign (0 negative, 1 positive), i.e. corner i sits at
/// R(yaw) * (sx*l/2, sy*w/2, sz*h/2) + center.
using CornerSet = std::array<Eigen::Vector3d, 8>;

/// Counter-clockwise convex polygon in the BEV plane.
struct ConvexPolygon2D {
    std::vector<Eigen::Vector2d> vertices;

    double area() const;
};

/// Normalizes an angle to (-pi, pi].
double wrap_angle(double a);

/// Throws std::invalid_argument unless all extents are positive and finite.
void validate_box(const OrientedBox3D& box);

double box_volume(const OrientedBox3D& box);
double bev_area(const OrientedBox3D& box);

/// Length of the BEV diagonal sqrt(l^2 + w^2).
double bev_diagonal(const OrientedBox3D& box);

CornerSet decode_corners(const OrientedBox3D& box);

/// Recovers (center, l, w, h, yaw) from corners in decode_corners order.
OrientedBox3D fit_box_from_corners(const CornerSet& corners);

/// p' = R(-yaw) * (p - center): sensor frame -> box canonical frame.
Eigen::Vector3d canonical_point(const Eigen::Vector3d& p, const OrientedBox3D& box);

/// Inverse of canonical_point.
Eigen::Vector3d sensor_point(const Eigen::Vector3d& p, const OrientedBox3D& box);

std::vector<Eigen::Vector3d> canonical_transform(std::span<const Eigen::Vector3d> points,
                                                 const OrientedBox3D& box);

/// Grows every extent by 2 * margin; center and yaw unchanged.
OrientedBox3D expand_box(const OrientedBox3D& box, double margin);

/// BEV rectangle of the box, counter-clockwise.
ConvexPolygon2D bev_footprint(const OrientedBox3D& box);

/// Sutherland-Hodgman intersection of the two BEV rectangles. Vertices within
/// 1e-9 m of a clip line count as on-line. Returns 0 for disjoint or
/// edge/point contact; exactly symmetric in its arguments.
double bev_intersection_area(const OrientedBox3D& a, const OrientedBox3D& b);

/// BEV intersection-over-union.
double bev_iou(const OrientedBox3D& a, const OrientedBox3D& b);

/// 3D intersection-over-union: BEV intersection area times vertical overlap
/// over the union volume. Symmetric, in [0, 1], exactly 1 for identical boxes.
double iou_3d(const OrientedBox3D& a, const OrientedBox3D& b);

/// Closed-interval membership in the canonical frame, with 2e-9 m slack so
/// that points constructed on a rotated face stay inside.
bool point_in_box(const Eigen::Vector3d& p, const OrientedBox3D& box);

std::vector<bool> points_in_box(std::span<const Eigen::Vector3d> points,
                                const OrientedBox3D& box);

/// Monte-Carlo IoU estimate: n uniform samples in the union's axis-aligned
/// bounding volume, deterministic per seed. Test oracle for iou_3d.
double mc_iou_oracle(const OrientedBox3D& a, const OrientedBox3D& b, std::uint64_t n,
                     std::uint64_t seed);

}  // namespace detref
