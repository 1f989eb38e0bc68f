#pragma once

#include "detref/geom.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace detref {

/// A box with its ranking confidence and owning scene index.
struct ScoredBox {
    OrientedBox3D box;
    double confidence = 0.0;
    int scene = 0;
};

struct PRCurve {
    std::vector<double> recall;
    std::vector<double> precision;
    double ap = 0.0;
};

/// Greedy one-to-one matching in confidence order at 3D IoU >= match_iou,
/// 40-recall-point interpolated AP. Absent when there is no ground truth.
std::optional<PRCurve> average_precision(std::span<const ScoredBox> detections,
                                         const std::vector<std::vector<OrientedBox3D>>& gt_per_scene,
                                         double match_iou = 0.7);

struct Correlation {
    double plcc = 0.0;
    double srcc = 0.0;
};

/// Pearson on the values; Spearman as Pearson on average ranks (ties get the
/// mean rank). Throws on fewer than two samples or a constant input.
Correlation correlation(std::span<const double> x, std::span<const double> y);

/// Fraction of ground truth matched by any detection, per ascending threshold.
std::vector<double> recall_curve(std::span<const ScoredBox> detections,
                                 const std::vector<std::vector<OrientedBox3D>>& gt_per_scene,
                                 std::span<const double> thresholds);

struct IouHistogram {
    double floor = 0.5;
    double bin_width = 0.05;
    std::vector<long> counts;
};

/// Per-box max-IoU against same-scene ground truth, binned over [floor, 1];
/// boxes below the floor are dropped.
IouHistogram iou_histogram(std::span<const ScoredBox> boxes,
                           const std::vector<std::vector<OrientedBox3D>>& gt_per_scene,
                           double bin_width = 0.05, double floor = 0.5);

/// Single-row CSV with named columns.
void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<std::string, double>>& columns);

/// Rows of "bin_low,bin_high,count".
void write_histogram_csv(const std::string& path, const IouHistogram& hist);

}  // namespace detref
