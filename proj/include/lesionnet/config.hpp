#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lesionnet/model.hpp"
#include "lesionnet/train.hpp"

namespace lesionnet {

/// Every run hyperparameter, as flat `key = value` text ('#' comments).
struct RunConfig {
    std::uint64_t seed = 0;
    int coarse_size = 64;
    int fine_resize = 128;
    int crop_size = 64;
    int hidden_units = 32;
    std::vector<int> blocks = {8, 16, 32, 64};
    int batch_size = 32;
    int stage1_updates = 150;
    double stage1_lr = 0.01;
    int stage2_updates = 600;
    double stage2_lr = 0.001;
    int unfreeze_blocks = 2;
    bool single_scale = false;
    bool augment = true;
    bool tta = true;

    bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

/// Rejects non-positive sizes, crop_size > fine_resize, unfreeze_blocks
/// outside [1, blocks), batch < 3, and (multi-scale) crop_size != coarse_size
/// -- the shared backbone takes a single input side.
void validate_run_config(const RunConfig& cfg);

/// Canonical key = value dump; parse_config_text(dump_config(c)) == c.
std::string dump_config(const RunConfig& cfg);

ModelConfig to_model_config(const RunConfig& cfg);
TwoStageSchedule to_schedule(const RunConfig& cfg);

}  // namespace lesionnet
