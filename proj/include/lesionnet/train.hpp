#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lesionnet/dataset.hpp"
#include "lesionnet/model.hpp"
#include "lesionnet/rng.hpp"

namespace lesionnet {

struct StageConfig {
    FreezeStage stage = FreezeStage::stage1;
    double lr = 0.01;
    int updates = 150;
    int batch_size = 32;
    bool augment = true;
    int unfreeze_blocks = 2;  // stage2 only
};

struct TrainLog {
    struct Record {
        int update = 0;  // 1-based, global across stages
        int stage = 1;
        double loss = 0.0;
    };
    std::vector<Record> records;
    std::array<std::int64_t, 8> aug_counts{};  // dihedral elements drawn during augmentation
};

/// One freeze stage: applies the stage's freeze mask, resets Adam, then runs
/// exactly cfg.updates steps. Per update: a balanced_batch plan, then per
/// image (in plan order, when augmentation is on) one uniform dihedral draw
/// applied to the raw image before preprocessing.
TrainLog train_stage(ModelParams& model, const Manifest& manifest, const StageConfig& cfg, Rng& rng,
                     ImageStore& store, int update_offset = 0);

struct TwoStageSchedule {
    StageConfig stage1;
    StageConfig stage2;
};

TwoStageSchedule default_schedule();

/// set_freeze(stage1) -> train_stage -> set_freeze(stage2) -> train_stage,
/// with a fresh Adam state per stage and a concatenated log.
TrainLog two_stage_train(ModelParams& model, const Manifest& manifest, const TwoStageSchedule& schedule, Rng& rng,
                         ImageStore& store);

/// CSV: update,stage,loss.
void write_train_log(const TrainLog& log, const std::filesystem::path& path);

}  // namespace lesionnet
