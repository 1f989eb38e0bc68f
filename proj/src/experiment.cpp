#include "detref/experiment.hpp"

#include "detref/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace detref {

namespace {

using nlohmann::json;

constexpr double kRecallThresholds[] = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

std::string source_name(ConfidenceSource s) {
    switch (s) {
        case ConfidenceSource::classification: return "classification";
        case ConfidenceSource::iou_pred: return "iou_pred";
        case ConfidenceSource::aligned_iou: return "aligned_iou";
        case ConfidenceSource::oracle_iou: return "oracle_iou";
    }
    return "aligned_iou";
}

ConfidenceSource source_from_name(const std::string& name) {
    if (name == "classification") return ConfidenceSource::classification;
    if (name == "iou_pred") return ConfidenceSource::iou_pred;
    if (name == "aligned_iou") return ConfidenceSource::aligned_iou;
    if (name == "oracle_iou") return ConfidenceSource::oracle_iou;
    throw std::invalid_argument("unknown confidence source: " + name);
}

template <typename T>
void get_if(const json& j, const char* key, T& field) {
    if (j.contains(key)) j.at(key).get_to(field);
}

json scene_to_json(const SceneConfig& c) {
    return json{{"min_boxes", c.min_boxes},       {"max_boxes", c.max_boxes},
                {"l_min", c.l_min},               {"l_max", c.l_max},
                {"w_min", c.w_min},               {"w_max", c.w_max},
                {"h_min", c.h_min},               {"h_max", c.h_max},
                {"r_min", c.r_min},               {"r_max", c.r_max},
                {"z_min", c.z_min},               {"z_max", c.z_max},
                {"points_per_box", c.points_per_box},
                {"clutter_points", c.clutter_points},
                {"clutter_r_min", c.clutter_r_min},
                {"clutter_r_max", c.clutter_r_max},
                {"clutter_z_min", c.clutter_z_min},
                {"clutter_z_max", c.clutter_z_max},
                {"min_gap", c.min_gap},           {"max_retries", c.max_retries}};
}

void scene_from_json(const json& j, SceneConfig& c) {
    get_if(j, "min_boxes", c.min_boxes);
    get_if(j, "max_boxes", c.max_boxes);
    get_if(j, "l_min", c.l_min);
    get_if(j, "l_max", c.l_max);
    get_if(j, "w_min", c.w_min);
    get_if(j, "w_max", c.w_max);
    get_if(j, "h_min", c.h_min);
    get_if(j, "h_max", c.h_max);
    get_if(j, "r_min", c.r_min);
    get_if(j, "r_max", c.r_max);
    get_if(j, "z_min", c.z_min);
    get_if(j, "z_max", c.z_max);
    get_if(j, "points_per_box", c.points_per_box);
    get_if(j, "clutter_points", c.clutter_points);
    get_if(j, "clutter_r_min", c.clutter_r_min);
    get_if(j, "clutter_r_max", c.clutter_r_max);
    get_if(j, "clutter_z_min", c.clutter_z_min);
    get_if(j, "clutter_z_max", c.clutter_z_max);
    get_if(j, "min_gap", c.min_gap);
    get_if(j, "max_retries", c.max_retries);
}

json model_to_json(const ModelConfig& m) {
    json sa = json::array();
    for (const SAConfig& level : m.aca.sa_levels)
        sa.push_back(json{{"n", level.n},
                          {"radius", level.radius},
                          {"m", level.m},
                          {"mlp_widths", level.mlp_widths}});
    return json{{"feat_loc_widths", m.feat.loc_widths},
                {"feat_sem_widths", m.feat.sem_widths},
                {"feat_fuse_widths", m.feat.fuse_widths},
                {"sa_levels", sa},
                {"corner_m", m.aca.corner_m},
                {"corner_mlp", m.aca.corner_mlp},
                {"corner_radius_scale", m.aca.corner_radius_scale},
                {"attentive", m.aca.attentive},
                {"corner_centers", m.aca.corner_centers},
                {"cge_mlp_widths", m.cge.mlp_widths},
                {"cge_d1", m.cge.d1},
                {"fuse_widths", m.fuse.widths},
                {"heads_hidden", m.heads.hidden},
                {"points_per_proposal", m.points_per_proposal},
                {"crop_margin", m.crop_margin},
                {"use_aca", m.use_aca},
                {"use_cge", m.use_cge}};
}

void model_from_json(const json& j, ModelConfig& m) {
    get_if(j, "feat_loc_widths", m.feat.loc_widths);
    get_if(j, "feat_sem_widths", m.feat.sem_widths);
    get_if(j, "feat_fuse_widths", m.feat.fuse_widths);
    if (j.contains("sa_levels")) {
        m.aca.sa_levels.clear();
        for (const json& level : j.at("sa_levels")) {
            SAConfig sa;
            get_if(level, "n", sa.n);
            get_if(level, "radius", sa.radius);
            get_if(level, "m", sa.m);
            get_if(level, "mlp_widths", sa.mlp_widths);
            m.aca.sa_levels.push_back(std::move(sa));
        }
    }
    get_if(j, "corner_m", m.aca.corner_m);
    get_if(j, "corner_mlp", m.aca.corner_mlp);
    get_if(j, "corner_radius_scale", m.aca.corner_radius_scale);
    get_if(j, "attentive", m.aca.attentive);
    get_if(j, "corner_centers", m.aca.corner_centers);
    get_if(j, "cge_mlp_widths", m.cge.mlp_widths);
    get_if(j, "cge_d1", m.cge.d1);
    get_if(j, "fuse_widths", m.fuse.widths);
    get_if(j, "heads_hidden", m.heads.hidden);
    get_if(j, "points_per_proposal", m.points_per_proposal);
    get_if(j, "crop_margin", m.crop_margin);
    get_if(j, "use_aca", m.use_aca);
    get_if(j, "use_cge", m.use_cge);
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.train_scenes < 0 || cfg.val_scenes < 0)
        throw std::invalid_argument("config: scene counts must be >= 0");
    if (cfg.scene.r_min > cfg.scene.r_max || cfg.scene.clutter_r_min > cfg.scene.clutter_r_max)
        throw std::invalid_argument("config: annulus inner radius exceeds outer radius");
    if (cfg.scene.min_boxes < 0 || cfg.scene.max_boxes < cfg.scene.min_boxes)
        throw std::invalid_argument("config: invalid box count range");
    if (!(cfg.thresholds.negative <= cfg.thresholds.gate &&
          cfg.thresholds.gate <= cfg.thresholds.positive))
        throw std::invalid_argument("config: thresholds must satisfy negative <= gate <= positive");
    if (cfg.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (cfg.batch_proposals < 1) throw std::invalid_argument("config: batch_proposals must be >= 1");
    if (cfg.jitter.per_gt < 1) throw std::invalid_argument("config: jitter.per_gt must be >= 1");
    if (cfg.nms.threshold < 0.0 || cfg.nms.threshold > 1.0)
        throw std::invalid_argument("config: nms.threshold out of [0, 1]");
    if (cfg.model.points_per_proposal < 1)
        throw std::invalid_argument("config: points_per_proposal must be >= 1");
    if (cfg.model.feat.loc_widths.empty() || cfg.model.feat.sem_widths.empty() ||
        cfg.model.feat.fuse_widths.empty() || cfg.model.aca.corner_mlp.empty() ||
        cfg.model.cge.mlp_widths.empty() || cfg.model.fuse.widths.empty())
        throw std::invalid_argument("config: MLP widths must be non-empty");
    for (const SAConfig& sa : cfg.model.aca.sa_levels)
        if (sa.n < 1 || sa.m < 1 || sa.radius <= 0.0 || sa.mlp_widths.empty())
            throw std::invalid_argument("config: invalid SA level");
    if (cfg.workers < 1) throw std::invalid_argument("config: workers must be >= 1");
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j{{"seed", cfg.seed},
           {"train_scenes", cfg.train_scenes},
           {"val_scenes", cfg.val_scenes},
           {"scene", scene_to_json(cfg.scene)},
           {"jitter", json{{"sigma_center", cfg.jitter.sigma_center},
                           {"sigma_size", cfg.jitter.sigma_size},
                           {"sigma_yaw", cfg.jitter.sigma_yaw},
                           {"per_gt", cfg.jitter.per_gt}}},
           {"model", model_to_json(cfg.model)},
           {"thresholds", json{{"positive", cfg.thresholds.positive},
                               {"negative", cfg.thresholds.negative},
                               {"gate", cfg.thresholds.gate}}},
           {"weights", json{{"alpha", cfg.weights.alpha},
                            {"beta", cfg.weights.beta},
                            {"gamma", cfg.weights.gamma},
                            {"lambda", cfg.weights.lambda}}},
           {"epochs", cfg.epochs},
           {"batch_proposals", cfg.batch_proposals},
           {"learning_rate", cfg.learning_rate},
           {"nms", json{{"source", source_name(cfg.nms.source)},
                        {"space", cfg.nms.space == IouSpace::three_d ? "3d" : "bev"},
                        {"threshold", cfg.nms.threshold},
                        {"score_floor", cfg.nms.score_floor}}},
           {"eval_match_iou", cfg.eval_match_iou},
           {"plcc_gate", cfg.plcc_gate},
           {"workers", cfg.workers}};
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
    const json j = json::parse(text);
    ExperimentConfig cfg;
    get_if(j, "seed", cfg.seed);
    get_if(j, "train_scenes", cfg.train_scenes);
    get_if(j, "val_scenes", cfg.val_scenes);
    if (j.contains("scene")) scene_from_json(j.at("scene"), cfg.scene);
    if (j.contains("jitter")) {
        const json& jj = j.at("jitter");
        get_if(jj, "sigma_center", cfg.jitter.sigma_center);
        get_if(jj, "sigma_size", cfg.jitter.sigma_size);
        get_if(jj, "sigma_yaw", cfg.jitter.sigma_yaw);
        get_if(jj, "per_gt", cfg.jitter.per_gt);
    }
    if (j.contains("model")) model_from_json(j.at("model"), cfg.model);
    if (j.contains("thresholds")) {
        const json& jt = j.at("thresholds");
        get_if(jt, "positive", cfg.thresholds.positive);
        get_if(jt, "negative", cfg.thresholds.negative);
        get_if(jt, "gate", cfg.thresholds.gate);
    }
    if (j.contains("weights")) {
        const json& jw = j.at("weights");
        get_if(jw, "alpha", cfg.weights.alpha);
        get_if(jw, "beta", cfg.weights.beta);
        get_if(jw, "gamma", cfg.weights.gamma);
        get_if(jw, "lambda", cfg.weights.lambda);
    }
    get_if(j, "epochs", cfg.epochs);
    get_if(j, "batch_proposals", cfg.batch_proposals);
    get_if(j, "learning_rate", cfg.learning_rate);
    if (j.contains("nms")) {
        const json& jn = j.at("nms");
        if (jn.contains("source")) cfg.nms.source = source_from_name(jn.at("source").get<std::string>());
        if (jn.contains("space")) {
            const std::string space = jn.at("space").get<std::string>();
            if (space == "3d")
                cfg.nms.space = IouSpace::three_d;
            else if (space == "bev")
                cfg.nms.space = IouSpace::bev;
            else
                throw std::invalid_argument("unknown IoU space: " + space);
        }
        get_if(jn, "threshold", cfg.nms.threshold);
        get_if(jn, "score_floor", cfg.nms.score_floor);
    }
    get_if(j, "eval_match_iou", cfg.eval_match_iou);
    get_if(j, "plcc_gate", cfg.plcc_gate);
    get_if(j, "workers", cfg.workers);
    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str());
}

std::uint64_t train_scene_seed(const ExperimentConfig& cfg, int index) {
    return mix_u64(mix_u64(cfg.seed, fnv1a("train")), static_cast<std::uint64_t>(index));
}

std::uint64_t val_scene_seed(const ExperimentConfig& cfg, int index) {
    return mix_u64(mix_u64(cfg.seed, fnv1a("val")), static_cast<std::uint64_t>(index));
}

std::vector<Scene> generate_train_scenes(const ExperimentConfig& cfg) {
    std::vector<Scene> scenes;
    scenes.reserve(static_cast<std::size_t>(cfg.train_scenes));
    for (int i = 0; i < cfg.train_scenes; ++i)
        scenes.push_back(gen_scene(cfg.scene, train_scene_seed(cfg, i)));
    return scenes;
}

std::vector<Scene> generate_val_scenes(const ExperimentConfig& cfg) {
    std::vector<Scene> scenes;
    scenes.reserve(static_cast<std::size_t>(cfg.val_scenes));
    for (int i = 0; i < cfg.val_scenes; ++i)
        scenes.push_back(gen_scene(cfg.scene, val_scene_seed(cfg, i)));
    return scenes;
}

std::vector<Proposal> proposals_for_scene(const ExperimentConfig& cfg, const Scene& scene) {
    return jitter_proposals(scene.gt, cfg.jitter, mix_u64(cfg.seed, scene.seed));
}

Model make_model(const ExperimentConfig& cfg) {
    Model model;
    model.cfg = cfg.model;
    model.init(cfg.seed);
    return model;
}

namespace {

struct ScenePool {
    std::vector<Proposal> proposals;
    std::vector<TargetAssignment> assignments;
    std::vector<int> positives;
    std::vector<int> negatives;
};

ScenePool build_pool(const Scene& scene, const ExperimentConfig& cfg) {
    ScenePool pool;
    pool.proposals = proposals_for_scene(cfg, scene);
    pool.assignments = assign_targets(pool.proposals, scene.gt, cfg.thresholds);
    for (std::size_t j = 0; j < pool.proposals.size(); ++j) {
        const SampledPoints pts =
            sample_proposal_points(scene, pool.proposals[j].box, cfg.model.points_per_proposal,
                                   cfg.model.crop_margin);
        if (pts.empty()) continue;  // nothing to pool from
        if (pool.assignments[j].label == MatchLabel::positive)
            pool.positives.push_back(static_cast<int>(j));
        else if (pool.assignments[j].label == MatchLabel::negative)
            pool.negatives.push_back(static_cast<int>(j));
    }
    return pool;
}

std::vector<int> cycle_draw(const std::vector<int>& pool, int count, Rng& rng) {
    std::vector<int> shuffled = pool;
    rng.shuffle(shuffled);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) out.push_back(shuffled[static_cast<std::size_t>(k) % shuffled.size()]);
    return out;
}

std::vector<int> draw_batch(const ScenePool& pool, int target, Rng& rng) {
    if (pool.positives.empty() && pool.negatives.empty()) return {};
    if (pool.positives.empty()) return cycle_draw(pool.negatives, target, rng);
    if (pool.negatives.empty()) return cycle_draw(pool.positives, target, rng);
    const int half = target / 2;
    std::vector<int> batch = cycle_draw(pool.positives, half, rng);
    const std::vector<int> negs = cycle_draw(pool.negatives, target - half, rng);
    batch.insert(batch.end(), negs.begin(), negs.end());
    return batch;
}

}  // namespace

std::vector<LossValues> train_model(Model& model, std::span<const Scene> scenes,
                                    const ExperimentConfig& cfg, std::ostream* progress) {
    validate_config(cfg);
    nn::OptimState opt;
    opt.lr = cfg.learning_rate;
    opt.init(model.store);
    model.store.zero_grads();

    std::vector<ScenePool> pools;
    pools.reserve(scenes.size());
    for (const Scene& scene : scenes) pools.push_back(build_pool(scene, cfg));

    std::vector<LossValues> log;
    log.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(scenes.size());
        std::iota(order.begin(), order.end(), 0);
        Rng order_rng(mix_u64(mix_u64(cfg.seed, fnv1a("epoch-order")), static_cast<std::uint64_t>(epoch)));
        order_rng.shuffle(order);

        LossValues epoch_sum{};
        int batches = 0;
        for (const int si : order) {
            const Scene& scene = scenes[static_cast<std::size_t>(si)];
            const ScenePool& pool = pools[static_cast<std::size_t>(si)];
            Rng batch_rng(mix_u64(mix_u64(cfg.seed, fnv1a("batch")),
                                  mix_u64(static_cast<std::uint64_t>(epoch),
                                          static_cast<std::uint64_t>(si))));
            const std::vector<int> batch = draw_batch(pool, cfg.batch_proposals, batch_rng);
            if (batch.empty()) continue;

            std::vector<TargetAssignment> batch_assignments;
            batch_assignments.reserve(batch.size());
            for (const int j : batch) batch_assignments.push_back(pool.assignments[static_cast<std::size_t>(j)]);
            const LossCounts counts = count_loss_terms(batch_assignments);

            LossValues batch_vals{};
            for (std::size_t k = 0; k < batch.size(); ++k) {
                const int j = batch[k];
                const Proposal& proposal = pool.proposals[static_cast<std::size_t>(j)];
                const SampledPoints pts = sample_proposal_points(
                    scene, proposal.box, cfg.model.points_per_proposal, cfg.model.crop_margin);
                nn::Tape tape;
                const nn::Var fused =
                    proposal_feature(tape, model, pts.coords, pts.descriptors, proposal.box,
                                     proposal_stream_seed(scene.seed, proposal.box));
                const ProposalPrediction pred{model_heads(tape, model, fused), proposal.box};
                const LossVars vars =
                    loss_terms(tape, std::span(&pred, 1), std::span(&batch_assignments[k], 1),
                               cfg.weights, &counts);
                tape.backward(vars.total);
                const LossValues v = loss_values(tape, vars);
                batch_vals.cls += v.cls;
                batch_vals.reg += v.reg;
                batch_vals.iou += v.iou;
                batch_vals.aux += v.aux;
                batch_vals.total += v.total;
            }
            nn::adam_step(model.store, opt);
            epoch_sum.cls += batch_vals.cls;
            epoch_sum.reg += batch_vals.reg;
            epoch_sum.iou += batch_vals.iou;
            epoch_sum.aux += batch_vals.aux;
            epoch_sum.total += batch_vals.total;
            ++batches;
        }
        LossValues mean{};
        if (batches > 0) {
            const double n = static_cast<double>(batches);
            mean = {epoch_sum.cls / n, epoch_sum.reg / n, epoch_sum.iou / n, epoch_sum.aux / n,
                    epoch_sum.total / n};
        }
        log.push_back(mean);
        if (progress)
            (*progress) << "epoch " << epoch + 1 << "/" << cfg.epochs << " total " << mean.total
                        << " (cls " << mean.cls << " reg " << mean.reg << " iou " << mean.iou
                        << " aux " << mean.aux << ")\n";
    }
    return log;
}

namespace {

struct SceneInference {
    std::vector<Proposal> proposals;
    std::vector<Detection> first;        // unaligned iou_pred
    std::vector<double> aligned_iou;     // per detection
};

SceneInference infer_scene(Model& model, const Scene& scene, const ExperimentConfig& cfg) {
    SceneInference си;
    SceneInference out;
    out.proposals = proposals_for_scene(cfg, scene);
    out.first = infer_first_pass(scene, out.proposals, model);
    std::vector<Detection> aligned = out.first;
    iou_align(aligned, scene, model);
    out.aligned_iou.reserve(aligned.size());
    for (const Detection& d : aligned) out.aligned_iou.push_back(d.iou_pred);
    return out;
}

double best_iou(const OrientedBox3D& box, std::span<const OrientedBox3D> gts) {
    double best = 0.0;
    for (const OrientedBox3D& gt : gts) best = std::max(best, iou_3d(box, gt));
    return best;
}

}  // namespace

EvalResult evaluate_model(Model& model, std::span<const Scene> scenes,
                          const ExperimentConfig& cfg) {
    validate_config(cfg);
    std::vector<SceneInference> inferred(scenes.size());
    const int workers = std::min<int>(cfg.workers, static_cast<int>(scenes.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < scenes.size(); ++i)
            inferred[i] = infer_scene(model, scenes[i], cfg);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(workers));
        std::atomic<std::size_t> next{0};
        for (int t = 0; t < workers; ++t) {
            threads.emplace_back([&]() {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= scenes.size()) break;
                    inferred[i] = infer_scene(model, scenes[i], cfg);
                }
            });
        }
        for (auto& thread : threads) thread.join();
    }

    std::vector<std::vector<OrientedBox3D>> gt_per_scene;
    gt_per_scene.reserve(scenes.size());
    for (const Scene& scene : scenes) gt_per_scene.push_back(scene.gt);

    EvalResult result;

    // Pre-NMS pools.
    std::vector<ScoredBox> proposal_boxes;
    std::vector<ScoredBox> refined_boxes;
    std::vector<double> plcc_unaligned_pred, plcc_aligned_pred, plcc_truth;
    double proposal_iou_sum = 0.0;
    long proposal_count = 0;
    double refined_iou_sum = 0.0;
    long refined_count = 0;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const SceneInference& inf = inferred[s];
        for (const Proposal& p : inf.proposals) {
            const double iou = best_iou(p.box, gt_per_scene[s]);
            proposal_boxes.push_back({p.box, iou, static_cast<int>(s)});
            proposal_iou_sum += iou;
            ++proposal_count;
        }
        for (std::size_t d = 0; d < inf.first.size(); ++d) {
            const Detection& det = inf.first[d];
            const double truth = best_iou(det.box, gt_per_scene[s]);
            refined_boxes.push_back({det.box, truth, static_cast<int>(s)});
            refined_iou_sum += truth;
            ++refined_count;
            if (!det.degenerate && truth > cfg.plcc_gate) {
                plcc_unaligned_pred.push_back(det.iou_pred);
                plcc_aligned_pred.push_back(inf.aligned_iou[d]);
                plcc_truth.push_back(truth);
            }
        }
    }
    result.pre_nms_detections = refined_count;
    result.mean_proposal_iou = proposal_count ? proposal_iou_sum / static_cast<double>(proposal_count) : 0.0;
    result.mean_refined_iou = refined_count ? refined_iou_sum / static_cast<double>(refined_count) : 0.0;
    result.proposal_hist = iou_histogram(proposal_boxes, gt_per_scene);
    result.refined_hist = iou_histogram(refined_boxes, gt_per_scene);
    result.recall_thresholds.assign(std::begin(kRecallThresholds), std::end(kRecallThresholds));
    result.recalls = recall_curve(refined_boxes, gt_per_scene, result.recall_thresholds);

    if (plcc_truth.size() >= 2) {
        try {
            const Correlation before = correlation(plcc_unaligned_pred, plcc_truth);
            const Correlation after = correlation(plcc_aligned_pred, plcc_truth);
            result.plcc_unaligned = before.plcc;
            result.srcc_unaligned = before.srcc;
            result.plcc_aligned = after.plcc;
            result.srcc_aligned = after.srcc;
            result.correlations_defined = true;
        } catch (const std::invalid_argument&) {
            result.correlations_defined = false;
        }
    }

    // Per-source AP: shared inference, per-source confidence + NMS.
    const ConfidenceSource sources[] = {ConfidenceSource::classification,
                                        ConfidenceSource::iou_pred, ConfidenceSource::aligned_iou,
                                        ConfidenceSource::oracle_iou};
    for (const ConfidenceSource source : sources) {
        std::vector<ScoredBox> pooled;
        for (std::size_t s = 0; s < scenes.size(); ++s) {
            const SceneInference& inf = inferred[s];
            std::vector<Detection> dets = inf.first;
            if (source == ConfidenceSource::aligned_iou)
                for (std::size_t d = 0; d < dets.size(); ++d) {
                    dets[d].iou_pred = inf.aligned_iou[d];
                    dets[d].aligned = true;
                }
            std::erase_if(dets, [&](const Detection& d) { return d.cls_score < cfg.nms.score_floor; });
            NmsConfig nms_cfg = cfg.nms;
            nms_cfg.source = source;
            const std::vector<Detection> kept = nms(dets, nms_cfg, gt_per_scene[s]);
            for (const Detection& det : kept)
                pooled.push_back({det.box, detection_confidence(det, source, gt_per_scene[s]),
                                  static_cast<int>(s)});
        }
        const auto curve = average_precision(pooled, gt_per_scene, cfg.eval_match_iou);
        const double ap = curve ? curve->ap : 0.0;
        switch (source) {
            case ConfidenceSource::classification: result.ap_classification = ap; break;
            case ConfidenceSource::iou_pred: result.ap_iou_pred = ap; break;
            case ConfidenceSource::aligned_iou: result.ap_aligned_iou = ap; break;
            case ConfidenceSource::oracle_iou: result.ap_oracle_iou = ap; break;
        }
    }
    return result;
}

std::vector<std::vector<Detection>> run_full_inference(Model& model,
                                                       std::span<const Scene> scenes,
                                                       const ExperimentConfig& cfg) {
    std::vector<std::vector<Detection>> out;
    out.reserve(scenes.size());
    for (const Scene& scene : scenes) {
        const std::vector<Proposal> proposals = proposals_for_scene(cfg, scene);
        out.push_back(full_inference(scene, proposals, model, cfg.nms, scene.gt));
    }
    return out;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& base, AblationGrid grid,
                                      std::span<const std::uint64_t> seeds,
                                      const std::string& checkpoint_dir, std::ostream* progress) {
    struct Cell {
        std::string name;
        bool use_aca, use_cge, corner_centers, attentive;
    };
    std::vector<Cell> cells;
    if (grid == AblationGrid::modules) {
        cells = {{"baseline", false, false, true, true},
                 {"aca_only", true, false, true, true},
                 {"cge_only", false, true, true, true},
                 {"aca_cge", true, true, true, true}};
    } else {
        cells = {{"corners_attentive", true, true, true, true},
                 {"random_attentive", true, true, false, true},
                 {"corners_mean", true, true, true, false},
                 {"random_mean", true, true, false, false}};
    }

    std::filesystem::create_directories(checkpoint_dir);
    std::vector<AblationRow> rows;
    for (const Cell& cell : cells) {
        AblationRow row;
        row.name = cell.name;
        for (const std::uint64_t seed : seeds) {
            ExperimentConfig cfg = base;
            cfg.seed = seed;
            cfg.model.use_aca = cell.use_aca;
            cfg.model.use_cge = cell.use_cge;
            cfg.model.aca.corner_centers = cell.corner_centers;
            cfg.model.aca.attentive = cell.attentive;
            cfg.nms.source = ConfidenceSource::aligned_iou;
            validate_config(cfg);

            Model model = make_model(cfg);
            const std::string ckpt =
                checkpoint_dir + "/" + cell.name + "_seed" + std::to_string(seed) + ".ckpt";
            if (nn::checkpoint_exists(ckpt)) {
                nn::load_checkpoint(ckpt, model.store);
                if (progress) (*progress) << cell.name << " seed " << seed << ": reusing " << ckpt << "\n";
            } else {
                const std::vector<Scene> train = generate_train_scenes(cfg);
                train_model(model, train, cfg, nullptr);
                nn::save_checkpoint(ckpt, model.store, cfg.seed);
                if (progress) (*progress) << cell.name << " seed " << seed << ": trained\n";
            }
            const std::vector<Scene> val = generate_val_scenes(cfg);
            const EvalResult eval = evaluate_model(model, val, cfg);
            row.ap += eval.ap_aligned_iou;
            row.plcc += eval.plcc_aligned;
            row.srcc += eval.srcc_aligned;
        }
        const double n = static_cast<double>(seeds.size());
        row.ap /= n;
        row.plcc /= n;
        row.srcc /= n;
        rows.push_back(row);
    }
    return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << "cell                  AP        PLCC      SRCC\n";
    char line[128];
    for (const AblationRow& row : rows) {
        std::snprintf(line, sizeof(line), "%-20s  %0.6f  %0.6f  %0.6f\n", row.name.c_str(), row.ap,
                      row.plcc, row.srcc);
        out << line;
    }
    return out.str();
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_ablation_csv: cannot open " + path);
    out << "cell,ap,plcc,srcc\n";
    char line[160];
    for (const AblationRow& row : rows) {
        std::snprintf(line, sizeof(line), "%s,%.9f,%.9f,%.9f\n", row.name.c_str(), row.ap, row.plcc,
                      row.srcc);
        out << line;
    }
    if (!out) throw std::runtime_error("write_ablation_csv: write failed for " + path);
}

}  // namespace detref
