#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lesionnet/dataset.hpp"
#include "lesionnet/image.hpp"
#include "lesionnet/rng.hpp"

namespace lesionnet {

/// A generated image plus its pre-noise lesion mask (1 inside the blob).
struct SynthRender {
    ImageBuffer image;
    std::vector<std::uint8_t> mask;  // native_size * native_size
    int size = 0;

    bool in_blob(int y, int x) const { return mask[static_cast<std::size_t>(y) * size + x] != 0; }
};

/// Lesion-like blob on a skin-tone background. Nevus: symmetric round blob,
/// one color, smooth border. Melanoma: off-center, per-quadrant radii,
/// sinusoidal border noise, two interior colors. Seborrheic keratosis: the
/// nevus blob overlaid with a +/-amplitude checker of period 4 px aligned to
/// even pixel coordinates, so it survives a 2x downsample and cancels in a
/// 4x one. All classes get additive N(0, 4/255) pixel noise.
SynthRender synth_render(ClassLabel cls, Rng& rng, int native_size = 256);

ImageBuffer synth_generate(ClassLabel cls, Rng& rng, int native_size = 256);

/// Writes <out_dir>/images/*.ppm plus train.csv and test.csv manifests with
/// paths relative to out_dir. Deterministic given seed.
void synth_dataset(const std::filesystem::path& out_dir, int n_train_per_class, int n_test_per_class,
                   std::uint64_t seed);

}  // namespace lesionnet
