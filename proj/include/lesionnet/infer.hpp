#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lesionnet/dataset.hpp"
#include "lesionnet/image.hpp"
#include "lesionnet/model.hpp"

namespace lesionnet {

struct PredictionRecord {
    std::string image_id;
    std::array<double, 3> probs{};  // melanoma, seborrheic_keratosis, nevus
    double melanoma_score = 0.0;
    double sk_score = 0.0;
};

/// Probabilities for one raw image. With TTA: the arithmetic mean of the
/// softmax outputs over the full dihedral orbit in canonical enum order,
/// with the transform applied after preprocessing to both scale inputs.
Tensor tta_predict(const ModelParams& model, const ImageBuffer& img, bool tta);

/// One-vs-rest: (P(melanoma), P(seborrheic_keratosis)).
std::pair<double, double> to_binary_tasks(const Tensor& probs);

/// One record per manifest entry, sorted by image_id.
std::vector<PredictionRecord> predict_manifest(const ModelParams& model, const Manifest& manifest, ImageStore& store,
                                               bool tta);

/// Per image and class: clamp to [1e-7, 1], take the K-th root of the
/// product, renormalize to sum 1, recompute task scores. Inputs are aligned
/// by image_id and must cover identical id sets.
std::vector<PredictionRecord> ensemble_geometric(const std::vector<std::vector<PredictionRecord>>& inputs);

/// CSV header image_id,melanoma,seborrheic_keratosis,nevus,melanoma_score,sk_score;
/// 9 significant digits; rows sorted by image_id.
void write_predictions(const std::vector<PredictionRecord>& records, const std::filesystem::path& path);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

/// Count of single model forward passes since the last reset (TTA does 8
/// per image); used to verify the --no-tta contract.
std::int64_t forward_pass_count();
void reset_forward_pass_count();

}  // namespace lesionnet
