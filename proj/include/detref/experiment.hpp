#pragma once

#include "detref/eval.hpp"
#include "detref/model.hpp"
#include "detref/pipeline.hpp"
#include "detref/synthdata.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace detref {

/// Everything one run needs: data generation, model, losses, training
/// schedule, NMS, and the ablation switches. JSON round-trippable.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    int train_scenes = 200;
    int val_scenes = 50;
    SceneConfig scene;
    JitterConfig jitter;
    ModelConfig model;
    LossThresholds thresholds;
    LossWeights weights;
    int epochs = 10;
    int batch_proposals = 64;  ///< per scene, sampled 1:1 positive:negative
    double learning_rate = 1e-3;
    NmsConfig nms;
    double eval_match_iou = 0.7;
    double plcc_gate = 0.55;  ///< detections below this true IoU are left out of PLCC/SRCC
    int workers = 1;          ///< evaluation parallelism; training stays sequential
};

/// Throws std::invalid_argument on inconsistent values.
void validate_config(const ExperimentConfig& cfg);

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

std::uint64_t train_scene_seed(const ExperimentConfig& cfg, int index);
std::uint64_t val_scene_seed(const ExperimentConfig& cfg, int index);

std::vector<Scene> generate_train_scenes(const ExperimentConfig& cfg);
std::vector<Scene> generate_val_scenes(const ExperimentConfig& cfg);

/// Proposal set used for a scene by both training and evaluation.
std::vector<Proposal> proposals_for_scene(const ExperimentConfig& cfg, const Scene& scene);

/// Joint training of feat + ACA + CGE + heads with ADAM. Returns per-epoch
/// mean loss terms. Deterministic given (cfg, model seed).
std::vector<LossValues> train_model(Model& model, std::span<const Scene> scenes,
                                    const ExperimentConfig& cfg, std::ostream* progress = nullptr);

struct EvalResult {
    double ap_classification = 0.0;
    double ap_iou_pred = 0.0;
    double ap_aligned_iou = 0.0;
    double ap_oracle_iou = 0.0;
    bool correlations_defined = false;
    double plcc_unaligned = 0.0;
    double srcc_unaligned = 0.0;
    double plcc_aligned = 0.0;
    double srcc_aligned = 0.0;
    std::vector<double> recall_thresholds;
    std::vector<double> recalls;  ///< pre-NMS, per threshold
    IouHistogram proposal_hist;
    IouHistogram refined_hist;
    double mean_proposal_iou = 0.0;
    double mean_refined_iou = 0.0;
    long pre_nms_detections = 0;
};

/// One inference sweep over the scenes: AP under all four confidence sources,
/// IoU-prediction correlations before/after alignment, recall curve, and the
/// proposal/refined IoU histograms.
EvalResult evaluate_model(Model& model, std::span<const Scene> scenes,
                          const ExperimentConfig& cfg);

/// Per-scene post-NMS detections for the configured source (detection dump).
std::vector<std::vector<Detection>> run_full_inference(Model& model,
                                                       std::span<const Scene> scenes,
                                                       const ExperimentConfig& cfg);

Model make_model(const ExperimentConfig& cfg);

enum class AblationGrid { modules, aggregation };

struct AblationRow {
    std::string name;
    double ap = 0.0;    ///< aligned-IoU confidence
    double plcc = 0.0;
    double srcc = 0.0;
};

/// Trains (or reloads) one model per grid cell per seed and evaluates it;
/// metrics are seed-averaged. Checkpoints land in checkpoint_dir and existing
/// ones are reused.
std::vector<AblationRow> run_ablation(const ExperimentConfig& base, AblationGrid grid,
                                      std::span<const std::uint64_t> seeds,
                                      const std::string& checkpoint_dir,
                                      std::ostream* progress = nullptr);

std::string format_ablation_table(const std::vector<AblationRow>& rows);
void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

}  // namespace detref
