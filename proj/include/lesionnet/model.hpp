#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lesionnet/autodiff.hpp"
#include "lesionnet/image.hpp"
#include "lesionnet/optim.hpp"
#include "lesionnet/rng.hpp"
#include "lesionnet/tensor.hpp"

namespace lesionnet {

enum class ModelMode : int {
    multi_scale = 0,
    single_scale = 1,
};

struct ModelConfig {
    std::vector<int> channels = {8, 16, 32, 64};  // conv block widths
    int input_side = 64;                          // backbone input side (crop/coarse size)
    int hidden_units = 32;
    int fine_resize = 128;  // multi_scale preprocessing: resize side before the center crop
    ModelMode mode = ModelMode::multi_scale;

    int num_blocks() const { return static_cast<int>(channels.size()); }
    int feature_width() const { return channels.back(); }
    int head_input_width() const { return mode == ModelMode::multi_scale ? 2 * feature_width() : feature_width(); }
};

/// Throws on invalid configs: < 3 blocks, non-positive sizes, side not
/// divisible by 2^blocks, fine_resize < input_side in multi_scale mode.
void validate_model_config(const ModelConfig& cfg);

/// Input preprocessing implied by a model: coarse = input_side; fine =
/// resize(fine_resize) + crop(input_side). single_scale uses the coarse
/// path only.
PreprocessPlan model_preprocess(const ModelConfig& cfg);

/// Parameter schema, in canonical (serialization) order:
///   block<k>.kernel [c_k, c_{k-1}, 3, 3]   (c_0 = 3, k = 1..n)
///   block<k>.bias   [c_k]
///   head.weight     [hidden, head_input_width]
///   head.bias       [hidden]
///   out.weight      [3, hidden]
///   out.bias        [3]
struct ModelParams {
    ModelConfig config;
    ParamSet params;
};

/// Glorot-uniform weights (a = sqrt(6/(fan_in+fan_out)), conv fans include
/// the 3x3 receptive field), zero biases, drawn in schema order.
ModelParams build_model(const ModelConfig& cfg, Rng& rng);

// --- Eager forward passes (inference) ---

/// Per block: conv3x3 -> relu -> maxpool2; then global average pool.
Tensor backbone_forward(const ModelParams& model, const Tensor& img);
/// concat(backbone(coarse), backbone(fine)) -> dense -> relu -> dense -> softmax.
Tensor multiscale_forward(const ModelParams& model, const Tensor& coarse, const Tensor& fine);
Tensor single_scale_forward(const ModelParams& model, const Tensor& img);

// --- Graph builders (training) ---

/// One graph node per parameter; both scale branches must reuse these nodes
/// so the backbone is genuinely shared.
struct ModelNodes {
    std::map<std::string, NodeId> param;
    NodeId at(const std::string& name) const;
};

ModelNodes bind_model(Graph& g, const ModelParams& model);
NodeId backbone_features(Graph& g, const ModelNodes& nodes, const ModelConfig& cfg, NodeId input);
NodeId model_probs(Graph& g, const ModelNodes& nodes, const ModelParams& model, NodeId coarse, NodeId fine);
NodeId model_probs_single(Graph& g, const ModelNodes& nodes, const ModelParams& model, NodeId input);

// --- Staged fine-tuning ---

enum class FreezeStage {
    stage1,  // backbone frozen, head + output trainable
    stage2,  // last unfreeze_blocks conv blocks also trainable
};

void set_freeze(ModelParams& model, FreezeStage stage, int unfreeze_blocks = 2);

// --- Serialization ---

/// Binary format: magic "MSCW"; u32 version = 1; u32 entry count; per entry
/// u16 name length + name + u8 ndim + u32 dims + f64 little-endian payload;
/// u32 CRC32 (poly 0xEDB88320) over all payload bytes; mode byte
/// (0 multi_scale, 1 single_scale); config block: u8 block count, u32 per
/// channel width, u32 input_side, u32 hidden_units, u32 fine_resize.
void save_weights(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_weights(const std::filesystem::path& path, std::optional<ModelMode> expected_mode = std::nullopt);

}  // namespace lesionnet
