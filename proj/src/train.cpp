#include "lesionnet/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace lesionnet {

namespace {

// Forward + loss for one sample; returns the loss node.
NodeId sample_loss(Graph& g, const ModelNodes& nodes, const ModelParams& model, const ImageBuffer& raw,
                   const PreprocessPlan& plan, int label) {
    if (model.config.mode == ModelMode::multi_scale) {
        const ScalePair pair = preprocess_pair(raw, plan);
        const NodeId coarse = g.input(pair.coarse);
        const NodeId fine = g.input(pair.fine);
        return g.cross_entropy(model_probs(g, nodes, model, coarse, fine), label);
    }
    const NormalizedImage in = resize_bilinear(rescale_to_unit(raw), plan.coarse_size, plan.coarse_size);
    return g.cross_entropy(model_probs_single(g, nodes, model, g.input(in)), label);
}

}  // namespace

TrainLog train_stage(ModelParams& model, const Manifest& manifest, const StageConfig& cfg, Rng& rng,
                     ImageStore& store, int update_offset) {
    require(cfg.lr > 0.0, "train: learning rate must be positive");
    require(cfg.updates >= 0, "train: update count must be non-negative");
    require(!manifest.empty(), "train: empty manifest");

    set_freeze(model, cfg.stage, cfg.unfreeze_blocks);
    AdamState adam;  // fresh moments at stage start
    const PreprocessPlan pre = model_preprocess(model.config);
    const int stage_tag = cfg.stage == FreezeStage::stage1 ? 1 : 2;

    TrainLog log;
    for (int u = 0; u < cfg.updates; ++u) {
        const BatchPlan plan = balanced_batch(rng, manifest, cfg.batch_size);

        Graph g;
        const ModelNodes nodes = bind_model(g, model);
        NodeId total = -1;
        for (int idx : plan.indices) {
            const ManifestEntry& entry = manifest[static_cast<std::size_t>(idx)];
            const ImageBuffer& raw = store.get(entry.path);
            NodeId loss;
            if (cfg.augment) {
                const Dihedral d = static_cast<Dihedral>(rng.uniform_int(8));
                ++log.aug_counts[static_cast<std::size_t>(d)];
                loss = sample_loss(g, nodes, model, apply_dihedral(d, raw), pre, static_cast<int>(entry.label));
            } else {
                loss = sample_loss(g, nodes, model, raw, pre, static_cast<int>(entry.label));
            }
            total = (total < 0) ? loss : g.add(total, loss);
        }
        const NodeId mean_loss = g.scale(total, 1.0 / static_cast<double>(plan.indices.size()));
        g.backward(mean_loss);

        GradMap grads;
        for (const Parameter& p : model.params.items()) {
            if (p.trainable) grads.emplace(p.name, g.grad(nodes.at(p.name)));
        }
        adam_step(model.params, grads, adam, cfg.lr);

        const double loss_value = g.scalar_value(mean_loss);
        require(std::isfinite(loss_value),
                "train: non-finite loss at update " + std::to_string(update_offset + u + 1));
        log.records.push_back({update_offset + u + 1, stage_tag, loss_value});
    }
    return log;
}

TwoStageSchedule default_schedule() {
    TwoStageSchedule s;
    s.stage1 = {FreezeStage::stage1, 0.01, 150, 32, true, 2};
    s.stage2 = {FreezeStage::stage2, 0.001, 600, 32, true, 2};
    return s;
}

TrainLog two_stage_train(ModelParams& model, const Manifest& manifest, const TwoStageSchedule& schedule, Rng& rng,
                         ImageStore& store) {
    require(schedule.stage1.stage == FreezeStage::stage1 && schedule.stage2.stage == FreezeStage::stage2,
            "train: schedule must be [stage1 cfg, stage2 cfg]");
    TrainLog log = train_stage(model, manifest, schedule.stage1, rng, store, 0);
    TrainLog log2 = train_stage(model, manifest, schedule.stage2, rng, store, schedule.stage1.updates);
    log.records.insert(log.records.end(), log2.records.begin(), log2.records.end());
    for (std::size_t i = 0; i < log.aug_counts.size(); ++i) log.aug_counts[i] += log2.aug_counts[i];
    return log;
}

void write_train_log(const TrainLog& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "train: cannot write log " + path.string());
    out << "update,stage,loss\n";
    char buf[64];
    for (const TrainLog::Record& r : log.records) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.9g\n", r.update, r.stage, r.loss);
        out << buf;
    }
    require(static_cast<bool>(out), "train: log write failed for " + path.string());
}

}  // namespace lesionnet
