#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lesionnet/errors.hpp"
#include "lesionnet/image.hpp"
#include "lesionnet/rng.hpp"

namespace lesionnet {

enum class ClassLabel : int {
    melanoma = 0,
    seborrheic_keratosis = 1,
    nevus = 2,
};

constexpr int kNumClasses = 3;

const char* class_name(ClassLabel label);
/// Case-insensitive; throws on anything but the three known names.
ClassLabel parse_class_label(const std::string& text);

struct ManifestEntry {
    std::string image_id;
    std::filesystem::path path;  // resolved against the manifest's directory
    ClassLabel label = ClassLabel::melanoma;
};

using Manifest = std::vector<ManifestEntry>;

/// CSV with header image_id,path,label; LF or CRLF; relative paths are
/// resolved against the manifest file's directory and must exist.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Indices into a manifest for one mini-batch, grouped by class.
struct BatchPlan {
    std::vector<int> indices;               // length = batch size
    std::array<int, kNumClasses> counts{};  // per-class counts, sum = batch size
};

/// Equal per-class counts floor(batch/3); the remainder goes to distinct
/// classes chosen uniformly per batch; within a class indices are drawn
/// uniformly with replacement.
BatchPlan balanced_batch(Rng& rng, const Manifest& manifest, int batch_size);

/// Stratified k-fold: per-class shuffle, then round-robin fold assignment.
/// Returns (train, holdout), both in original manifest order. The rng draws
/// do not depend on fold_index, so one seed yields one partition.
std::pair<Manifest, Manifest> kfold_split(const Manifest& manifest, int k, int fold_index, Rng& rng);

/// Loads PPM files once and keeps the decoded buffers.
class ImageStore {
  public:
    const ImageBuffer& get(const std::filesystem::path& path);
    std::size_t size() const { return cache_.size(); }

  private:
    std::map<std::string, ImageBuffer> cache_;
};

}  // namespace lesionnet
