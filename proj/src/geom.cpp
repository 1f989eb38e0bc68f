#include "detref/geom.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace detref {

namespace {

constexpr double kClipTol = 1e-9;       // vertices this close to a clip line are on-line
constexpr double kMembershipTol = 2e-9; // closed-boundary slack: covers rotation
                                        // round-off and 9-decimal file rounding

// Deterministic order so that binary operations evaluate both argument orders
// identically (exact symmetry of bev_intersection_area and iou_3d).
bool box_less(const OrientedBox3D& a, const OrientedBox3D& b) {
    const double ka[7] = {a.cx, a.cy, a.cz, a.l, a.w, a.h, a.yaw};
    const double kb[7] = {b.cx, b.cy, b.cz, b.l, b.w, b.h, b.yaw};
    return std::lexicographical_compare(ka, ka + 7, kb, kb + 7);
}

double canonical_unit(std::mt19937_64& gen) { return (gen() >> 11) * 0x1.0p-53; }

}  // namespace

double ConvexPolygon2D::area() const {
    const std::size_t n = vertices.size();
    if (n < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d& p = vertices[i];
        const Eigen::Vector2d& q = vertices[(i + 1) % n];
        twice += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * twice;
}

double wrap_angle(double a) {
    double r = std::fmod(a + M_PI, 2.0 * M_PI);
    if (r <= 0.0) r += 2.0 * M_PI;
    return r - M_PI;
}

void validate_box(const OrientedBox3D& box) {
    if (!(box.l > 0.0) || !(box.w > 0.0) || !(box.h > 0.0))
        throw std::invalid_argument("OrientedBox3D: extents must be positive");
    if (!std::isfinite(box.cx) || !std::isfinite(box.cy) || !std::isfinite(box.cz) ||
        !std::isfinite(box.l) || !std::isfinite(box.w) || !std::isfinite(box.h) ||
        !std::isfinite(box.yaw))
        throw std::invalid_argument("OrientedBox3D: fields must be finite");
}

double box_volume(const OrientedBox3D& box) { return box.l * box.w * box.h; }

double bev_area(const OrientedBox3D& box) { return box.l * box.w; }

double bev_diagonal(const OrientedBox3D& box) {
    return std::sqrt(box.l * box.l + box.w * box.w);
}

CornerSet decode_corners(const OrientedBox3D& box) {
    validate_box(box);
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    CornerSet corners;
    for (int i = 0; i < 8; ++i) {
        const double x = (i & 4) ? 0.5 * box.l : -0.5 * box.l;
        const double y = (i & 2) ? 0.5 * box.w : -0.5 * box.w;
        const double z = (i & 1) ? 0.5 * box.h : -0.5 * box.h;
        corners[i] = Eigen::Vector3d(box.cx + c * x - s * y, box.cy + s * x + c * y, box.cz + z);
    }
    return corners;
}

OrientedBox3D fit_box_from_corners(const CornerSet& corners) {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    for (const auto& p : corners) center += p;
    center /= 8.0;
    const Eigen::Vector3d ex = corners[4] - corners[0];  // x sign flips
    const Eigen::Vector3d ey = corners[2] - corners[0];  // y sign flips
    const Eigen::Vector3d ez = corners[1] - corners[0];  // z sign flips
    OrientedBox3D box;
    box.cx = center.x();
    box.cy = center.y();
    box.cz = center.z();
    box.l = ex.norm();
    box.w = ey.norm();
    box.h = ez.norm();
    box.yaw = wrap_angle(std::atan2(ex.y(), ex.x()));
    return box;
}

Eigen::Vector3d canonical_point(const Eigen::Vector3d& p, const OrientedBox3D& box) {
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    const double dx = p.x() - box.cx;
    const double dy = p.y() - box.cy;
    return {c * dx + s * dy, -s * dx + c * dy, p.z() - box.cz};
}

Eigen::Vector3d sensor_point(const Eigen::Vector3d& p, const OrientedBox3D& box) {
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    return {box.cx + c * p.x() - s * p.y(), box.cy + s * p.x() + c * p.y(), box.cz + p.z()};
}

std::vector<Eigen::Vector3d> canonical_transform(std::span<const Eigen::Vector3d> points,
                                                 const OrientedBox3D& box) {
    std::vector<Eigen::Vector3d> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(canonical_point(p, box));
    return out;
}

OrientedBox3D expand_box(const OrientedBox3D& box, double margin) {
    if (margin < 0.0) throw std::invalid_argument("expand_box: margin must be >= 0");
    OrientedBox3D out = box;
    out.l += 2.0 * margin;
    out.w += 2.0 * margin;
    out.h += 2.0 * margin;
    return out;
}

ConvexPolygon2D bev_footprint(const OrientedBox3D& box) {
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    const double hl = 0.5 * box.l;
    const double hw = 0.5 * box.w;
    // Quadrant walk (+,+) (-,+) (-,-) (+,-) stays counter-clockwise under rotation.
    const double lx[4] = {hl, -hl, -hl, hl};
    const double ly[4] = {hw, hw, -hw, -hw};
    ConvexPolygon2D poly;
    poly.vertices.reserve(4);
    for (int i = 0; i < 4; ++i)
        poly.vertices.emplace_back(box.cx + c * lx[i] - s * ly[i], box.cy + s * lx[i] + c * ly[i]);
    return poly;
}

namespace {

// Clips a convex CCW polygon by the half-plane left of (a -> b).
std::vector<Eigen::Vector2d> clip_by_edge(const std::vector<Eigen::Vector2d>& subject,
                                          const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    std::vector<Eigen::Vector2d> out;
    out.reserve(subject.size() + 1);
    const Eigen::Vector2d dir = b - a;
    const std::size_t n = subject.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d& p = subject[i];
        const Eigen::Vector2d& q = subject[(i + 1) % n];
        const double dp = dir.x() * (p.y() - a.y()) - dir.y() * (p.x() - a.x());
        const double dq = dir.x() * (q.y() - a.y()) - dir.y() * (q.x() - a.x());
        const bool pin = dp >= -kClipTol;
        const bool qin = dq >= -kClipTol;
        if (pin) out.push_back(p);
        if (pin != qin && std::abs(dp - dq) > kClipTol) {
            const double t = dp / (dp - dq);
            out.push_back(p + t * (q - p));
        }
    }
    return out;
}

}  // namespace

double bev_intersection_area(const OrientedBox3D& a, const OrientedBox3D& b) {
    validate_box(a);
    validate_box(b);
    const OrientedBox3D& first = box_less(b, a) ? b : a;
    const OrientedBox3D& second = box_less(b, a) ? a : b;
    const ConvexPolygon2D clip = bev_footprint(second);
    std::vector<Eigen::Vector2d> poly = bev_footprint(first).vertices;
    for (std::size_t i = 0; i < 4 && !poly.empty(); ++i)
        poly = clip_by_edge(poly, clip.vertices[i], clip.vertices[(i + 1) % 4]);
    if (poly.size() < 3) return 0.0;
    ConvexPolygon2D inter;
    inter.vertices = std::move(poly);
    return std::max(0.0, inter.area());
}

double bev_iou(const OrientedBox3D& a, const OrientedBox3D& b) {
    if (a == b) return 1.0;
    const double inter = bev_intersection_area(a, b);
    const double uni = bev_area(a) + bev_area(b) - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const OrientedBox3D& a, const OrientedBox3D& b) {
    if (a == b) {
        validate_box(a);
        return 1.0;
    }
    const double inter_bev = bev_intersection_area(a, b);
    const double z_lo = std::max(a.cz - 0.5 * a.h, b.cz - 0.5 * b.h);
    const double z_hi = std::min(a.cz + 0.5 * a.h, b.cz + 0.5 * b.h);
    const double dz = std::max(0.0, z_hi - z_lo);
    const double inter = inter_bev * dz;
    const double uni = box_volume(a) + box_volume(b) - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

bool point_in_box(const Eigen::Vector3d& p, const OrientedBox3D& box) {
    const Eigen::Vector3d q = canonical_point(p, box);
    return std::abs(q.x()) <= 0.5 * box.l + kMembershipTol &&
           std::abs(q.y()) <= 0.5 * box.w + kMembershipTol &&
           std::abs(q.z()) <= 0.5 * box.h + kMembershipTol;
}

std::vector<bool> points_in_box(std::span<const Eigen::Vector3d> points,
                                const OrientedBox3D& box) {
    std::vector<bool> mask(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) mask[i] = point_in_box(points[i], box);
    return mask;
}

double mc_iou_oracle(const OrientedBox3D& a, const OrientedBox3D& b, std::uint64_t n,
                     std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("mc_iou_oracle: n must be >= 1");
    validate_box(a);
    validate_box(b);

    Eigen::Vector3d lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
                       std::numeric_limits<double>::max());
    Eigen::Vector3d hi = -lo;
    for (const OrientedBox3D* box : {&a, &b}) {
        for (const auto& corner : decode_corners(*box)) {
            lo = lo.cwiseMin(corner);
            hi = hi.cwiseMax(corner);
        }
    }
    const Eigen::Vector3d span = hi - lo;

    struct Frame {
        double cx, cy, cz, hl, hw, hh, c, s;
    };
    const auto frame = [](const OrientedBox3D& box) {
        return Frame{box.cx, box.cy,  box.cz,           0.5 * box.l,
                     0.5 * box.w, 0.5 * box.h, std::cos(box.yaw), std::sin(box.yaw)};
    };
    const Frame fa = frame(a);
    const Frame fb = frame(b);
    const auto inside = [](const Frame& f, double x, double y, double z) {
        const double dx = x - f.cx;
        const double dy = y - f.cy;
        return std::abs(f.c * dx + f.s * dy) <= f.hl && std::abs(-f.s * dx + f.c * dy) <= f.hw &&
               std::abs(z - f.cz) <= f.hh;
    };

    std::mt19937_64 gen(seed);
    std::uint64_t in_a = 0, in_b = 0, in_both = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const double x = lo.x() + span.x() * canonical_unit(gen);
        const double y = lo.y() + span.y() * canonical_unit(gen);
        const double z = lo.z() + span.z() * canonical_unit(gen);
        const bool ia = inside(fa, x, y, z);
        const bool ib = inside(fb, x, y, z);
        in_a += ia;
        in_b += ib;
        in_both += ia && ib;
    }
    const std::uint64_t in_union = in_a + in_b - in_both;
    if (in_union == 0) return 0.0;
    return static_cast<double>(in_both) / static_cast<double>(in_union);
}

}  // namespace detref
