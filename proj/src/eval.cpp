#include "detref/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace detref {

std::optional<PRCurve> average_precision(std::span<const ScoredBox> detections,
                                         const std::vector<std::vector<OrientedBox3D>>& gt_per_scene,
                                         double match_iou) {
    std::size_t total_gt = 0;
    for (const auto& gts : gt_per_scene) total_gt += gts.size();
    if (total_gt == 0) return std::nullopt;

    std::vector<int> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return detections[static_cast<std::size_t>(a)].confidence >
               detections[static_cast<std::size_t>(b)].confidence;
    });

    std::vector<std::vector<bool>> taken;
    taken.reserve(gt_per_scene.size());
    for (const auto& gts : gt_per_scene) taken.emplace_back(gts.size(), false);

    PRCurve curve;
    curve.recall.reserve(detections.size());
    curve.precision.reserve(detections.size());
    std::size_t tp = 0, fp = 0;
    for (const int idx : order) {
        const ScoredBox& det = detections[static_cast<std::size_t>(idx)];
        const auto& gts = gt_per_scene.at(static_cast<std::size_t>(det.scene));
        int best = -1;
        double best_iou = match_iou;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[static_cast<std::size_t>(det.scene)][g]) continue;
            const double iou = iou_3d(det.box, gts[g]);
            if (iou >= best_iou) {
                best_iou = iou;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) {
            taken[static_cast<std::size_t>(det.scene)][static_cast<std::size_t>(best)] = true;
            ++tp;
        } else {
            ++fp;
        }
        curve.recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
        curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }

    // 40 recall sample points at 1/40 .. 40/40 with max-precision interpolation.
    double ap = 0.0;
    for (int i = 1; i <= 40; ++i) {
        const double r = static_cast<double>(i) / 40.0;
        double p = 0.0;
        for (std::size_t k = 0; k < curve.recall.size(); ++k)
            if (curve.recall[k] >= r) p = std::max(p, curve.precision[k]);
        ap += p;
    }
    curve.ap = ap / 40.0;
    return curve;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return x[static_cast<std::size_t>(a)] < x[static_cast<std::size_t>(b)]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[static_cast<std::size_t>(order[j + 1])] == x[static_cast<std::size_t>(order[i])]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
        for (std::size_t k = i; k <= j; ++k) ranks[static_cast<std::size_t>(order[k])] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("correlation: undefined for constant input");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

Correlation correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("correlation: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("correlation: need at least two samples");
    Correlation c;
    c.plcc = pearson(x, y);
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    c.srcc = pearson(rx, ry);
    return c;
}

std::vector<double> recall_curve(std::span<const ScoredBox> detections,
                                 const std::vector<std::vector<OrientedBox3D>>& gt_per_scene,
                                 std::span<const double> thresholds) {
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (thresholds[i] < thresholds[i - 1])
            throw std::invalid_argument("recall_curve: thresholds must ascend");

    std::vector<double> best_iou;  // per GT, max IoU over detections in its scene
    std::size_t total_gt = 0;
    for (std::size_t s = 0; s < gt_per_scene.size(); ++s) total_gt += gt_per_scene[s].size();
    best_iou.reserve(total_gt);
    for (std::size_t s = 0; s < gt_per_scene.size(); ++s) {
        for (const OrientedBox3D& gt : gt_per_scene[s]) {
            double best = 0.0;
            for (const ScoredBox& det : detections)
                if (det.scene == static_cast<int>(s)) best = std::max(best, iou_3d(det.box, gt));
            best_iou.push_back(best);
        }
    }

    std::vector<double> recalls;
    recalls.reserve(thresholds.size());
    for (const double tau : thresholds) {
        if (total_gt == 0) {
            recalls.push_back(0.0);
            continue;
        }
        std::size_t matched = 0;
        for (const double b : best_iou) matched += b >= tau;
        recalls.push_back(static_cast<double>(matched) / static_cast<double>(total_gt));
    }
    return recalls;
}

IouHistogram iou_histogram(std::span<const ScoredBox> boxes,
                           const std::vector<std::vector<OrientedBox3D>>& gt_per_scene,
                           double bin_width, double floor) {
    IouHistogram hist;
    hist.floor = floor;
    hist.bin_width = bin_width;
    const int n_bins = static_cast<int>(std::round((1.0 - floor) / bin_width));
    hist.counts.assign(static_cast<std::size_t>(n_bins), 0);
    for (const ScoredBox& det : boxes) {
        const auto& gts = gt_per_scene.at(static_cast<std::size_t>(det.scene));
        double best = 0.0;
        for (const OrientedBox3D& gt : gts) best = std::max(best, iou_3d(det.box, gt));
        if (best < floor) continue;
        const int bin = std::min(static_cast<int>((best - floor) / bin_width), n_bins - 1);
        ++hist.counts[static_cast<std::size_t>(bin)];
    }
    return hist;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<std::string, double>>& columns) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    for (std::size_t i = 0; i < columns.size(); ++i)
        out << columns[i].first << (i + 1 < columns.size() ? "," : "\n");
    char buf[64];
    for (std::size_t i = 0; i < columns.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9f", columns[i].second);
        out << buf << (i + 1 < columns.size() ? "," : "\n");
    }
    if (!out) throw std::runtime_error("write_metrics_csv: write failed for " + path);
}

void write_histogram_csv(const std::string& path, const IouHistogram& hist) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_histogram_csv: cannot open " + path);
    out << "bin_low,bin_high,count\n";
    char buf[96];
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9f,%.9f,%ld\n", hist.floor + hist.bin_width * static_cast<double>(i),
                      hist.floor + hist.bin_width * static_cast<double>(i + 1), hist.counts[i]);
        out << buf;
    }
    if (!out) throw std::runtime_error("write_histogram_csv: write failed for " + path);
}

}  // namespace detref
