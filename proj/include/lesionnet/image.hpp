#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lesionnet/errors.hpp"
#include "lesionnet/tensor.hpp"

namespace lesionnet {

/// Interleaved 8-bit RGB image, row-major.
struct ImageBuffer {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // height * width * 3

    ImageBuffer() = default;
    ImageBuffer(int w, int h)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0) {
        require(w > 0 && h > 0, "image: dimensions must be positive");
    }

    std::size_t idx(int y, int x) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(x)) *
               3;
    }
    std::uint8_t sample(int y, int x, int c) const { return pixels[idx(y, x) + static_cast<std::size_t>(c)]; }
    void set(int y, int x, int c, std::uint8_t v) { pixels[idx(y, x) + static_cast<std::size_t>(c)] = v; }
};

/// A planar 3xHxW tensor with every element in [0,1].
using NormalizedImage = Tensor;

// --- PPM (binary "P6", maxval 255) ---

ImageBuffer decode_ppm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img);
ImageBuffer load_ppm(const std::filesystem::path& path);
void save_ppm(const ImageBuffer& img, const std::filesystem::path& path);

// --- Pixel-value and geometry transforms ---

/// sample/255 per channel, converting interleaved HxWx3 to planar 3xHxW.
NormalizedImage rescale_to_unit(const ImageBuffer& img);

/// Bilinear resampling with half-pixel centers and clamped edges.
NormalizedImage resize_bilinear(const NormalizedImage& img, int out_w, int out_h);

/// Square crop of the given side, window offset floor((H-size)/2), floor((W-size)/2).
NormalizedImage center_crop(const NormalizedImage& img, int size);

// --- The 8 symmetries of the square ---

/// Element i = flip^(i/4) applied after i%4 clockwise quarter turns.
/// This is also the canonical enumeration order for test-time augmentation.
enum class Dihedral : int {
    id = 0,
    r90 = 1,
    r180 = 2,
    r270 = 3,
    flip = 4,
    flip_r90 = 5,
    flip_r180 = 6,
    flip_r270 = 7,
};

constexpr std::array<Dihedral, 8> kDihedralAll = {
    Dihedral::id,       Dihedral::r90,      Dihedral::r180,      Dihedral::r270,
    Dihedral::flip,     Dihedral::flip_r90, Dihedral::flip_r180, Dihedral::flip_r270,
};

/// compose(g2, g1): the element equivalent to applying g1 first, then g2.
Dihedral dihedral_compose(Dihedral g2, Dihedral g1);
Dihedral dihedral_inverse(Dihedral g);
const char* dihedral_name(Dihedral g);

/// Exact pixel permutation; no interpolation. Non-square inputs are only
/// valid for the four elements that preserve the aspect ratio.
NormalizedImage apply_dihedral(Dihedral g, const NormalizedImage& img);
ImageBuffer apply_dihedral(Dihedral g, const ImageBuffer& img);

// --- Dual-scale preprocessing ---

struct PreprocessPlan {
    int coarse_size = 64;
    int fine_resize = 128;
    int crop_size = 64;
};

struct ScalePair {
    NormalizedImage coarse;
    NormalizedImage fine;
};

/// Coarse path: resize to coarse_size. Fine path: resize to fine_resize,
/// then center-crop crop_size. Both in [0,1].
ScalePair preprocess_pair(const ImageBuffer& img, const PreprocessPlan& plan);

}  // namespace lesionnet
