#include "lesionnet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

#include "lesionnet/errors.hpp"

namespace lesionnet {

namespace {

bool is_ppm_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Reads one decimal token starting at pos, skipping leading whitespace.
int parse_ppm_int(const std::vector<std::uint8_t>& bytes, std::size_t& pos, const char* what) {
    while (pos < bytes.size() && is_ppm_space(bytes[pos])) ++pos;
    require(pos < bytes.size() && std::isdigit(bytes[pos]), std::string("ppm: malformed header: expected ") + what);
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
        value = value * 10 + (bytes[pos] - '0');
        require(value <= std::numeric_limits<int>::max(), std::string("ppm: malformed header: ") + what + " out of range");
        ++pos;
    }
    return static_cast<int>(value);
}

}  // namespace

ImageBuffer decode_ppm(const std::vector<std::uint8_t>& bytes) {
    require(bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6', "ppm: bad magic: expected P6");
    std::size_t pos = 2;
    const int width = parse_ppm_int(bytes, pos, "width");
    const int height = parse_ppm_int(bytes, pos, "height");
    const int maxval = parse_ppm_int(bytes, pos, "maxval");
    require(width > 0 && height > 0, "ppm: malformed header: non-positive dimensions");
    require(maxval == 255, "ppm: unsupported maxval " + std::to_string(maxval) + " (only 255)");
    require(pos < bytes.size() && is_ppm_space(bytes[pos]), "ppm: malformed header: missing separator before payload");
    ++pos;  // exactly one whitespace byte between header and payload
    ImageBuffer img(width, height);
    const std::size_t need = img.pixels.size();
    require(bytes.size() - pos >= need, "ppm: truncated payload: need " + std::to_string(need) + " bytes, have " +
                                            std::to_string(bytes.size() - pos));
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), need, img.pixels.begin());
    return img;
}

std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img) {
    require(img.width > 0 && img.height > 0, "ppm: cannot encode empty image");
    require(img.pixels.size() == static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * 3,
            "ppm: pixel buffer size does not match dimensions");
    std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

ImageBuffer load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "ppm: cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_ppm(bytes);
    } catch (const Error& e) {
        fail(std::string(e.what()) + " [" + path.string() + "]");
    }
}

void save_ppm(const ImageBuffer& img, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = encode_ppm(img);
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), "ppm: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), "ppm: write failed for " + path.string());
}

NormalizedImage rescale_to_unit(const ImageBuffer& img) {
    require(img.width > 0 && img.height > 0, "image: cannot rescale empty image");
    Tensor out = Tensor::zeros({3, img.height, img.width});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                out.data[out.idx3(c, y, x)] = static_cast<double>(img.sample(y, x, c)) / 255.0;
            }
        }
    }
    return out;
}

NormalizedImage resize_bilinear(const NormalizedImage& img, int out_w, int out_h) {
    require(img.ndim() == 3 && img.dim(0) == 3, "image: resize expects a 3xHxW tensor");
    require(out_w > 0 && out_h > 0, "image: resize target must be positive");
    const int in_h = img.dim(1);
    const int in_w = img.dim(2);
    const double sy_scale = static_cast<double>(in_h) / static_cast<double>(out_h);
    const double sx_scale = static_cast<double>(in_w) / static_cast<double>(out_w);
    Tensor out = Tensor::zeros({3, out_h, out_w});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < out_h; ++y) {
            double sy = (y + 0.5) * sy_scale - 0.5;
            sy = std::clamp(sy, 0.0, static_cast<double>(in_h - 1));
            const int y0 = static_cast<int>(sy);
            const int y1 = std::min(y0 + 1, in_h - 1);
            const double fy = sy - y0;
            for (int x = 0; x < out_w; ++x) {
                double sx = (x + 0.5) * sx_scale - 0.5;
                sx = std::clamp(sx, 0.0, static_cast<double>(in_w - 1));
                const int x0 = static_cast<int>(sx);
                const int x1 = std::min(x0 + 1, in_w - 1);
                const double fx = sx - x0;
                const double top = (1.0 - fx) * img.data[img.idx3(c, y0, x0)] + fx * img.data[img.idx3(c, y0, x1)];
                const double bot = (1.0 - fx) * img.data[img.idx3(c, y1, x0)] + fx * img.data[img.idx3(c, y1, x1)];
                out.data[out.idx3(c, y, x)] = std::clamp((1.0 - fy) * top + fy * bot, 0.0, 1.0);
            }
        }
    }
    return out;
}

NormalizedImage center_crop(const NormalizedImage& img, int size) {
    require(img.ndim() == 3 && img.dim(0) == 3, "image: crop expects a 3xHxW tensor");
    const int h = img.dim(1);
    const int w = img.dim(2);
    require(size > 0 && size <= h && size <= w,
            "image: crop size " + std::to_string(size) + " exceeds image " + std::to_string(w) + "x" + std::to_string(h));
    const int oy = (h - size) / 2;
    const int ox = (w - size) / 2;
    Tensor out = Tensor::zeros({3, size, size});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                out.data[out.idx3(c, y, x)] = img.data[img.idx3(c, oy + y, ox + x)];
            }
        }
    }
    return out;
}

Dihedral dihedral_compose(Dihedral g2, Dihedral g1) {
    const int r1 = static_cast<int>(g1) % 4, f1 = static_cast<int>(g1) / 4;
    const int r2 = static_cast<int>(g2) % 4, f2 = static_cast<int>(g2) / 4;
    // F^f2 R^r2 F^f1 R^r1 with R F = F R^-1.
    const int r = ((f1 ? r1 - r2 : r1 + r2) % 4 + 4) % 4;
    const int f = f1 ^ f2;
    return static_cast<Dihedral>(f * 4 + r);
}

Dihedral dihedral_inverse(Dihedral g) {
    const int r = static_cast<int>(g) % 4, f = static_cast<int>(g) / 4;
    return static_cast<Dihedral>(f ? static_cast<int>(g) : (4 - r) % 4);
}

const char* dihedral_name(Dihedral g) {
    static const char* names[8] = {"id", "r90", "r180", "r270", "flip", "flip_r90", "flip_r180", "flip_r270"};
    return names[static_cast<int>(g)];
}

namespace {

// Source coordinates for output pixel (y, x) of the transformed image.
// in_h/in_w are the input dims; square is required except for id, r180,
// flip, flip_r180.
inline void dihedral_src(Dihedral g, int y, int x, int in_h, int in_w, int& sy, int& sx) {
    switch (g) {
        case Dihedral::id: sy = y; sx = x; break;
        case Dihedral::r90: sy = in_h - 1 - x; sx = y; break;
        case Dihedral::r180: sy = in_h - 1 - y; sx = in_w - 1 - x; break;
        case Dihedral::r270: sy = x; sx = in_w - 1 - y; break;
        case Dihedral::flip: sy = y; sx = in_w - 1 - x; break;
        case Dihedral::flip_r90: sy = x; sx = y; break;
        case Dihedral::flip_r180: sy = in_h - 1 - y; sx = x; break;
        case Dihedral::flip_r270: sy = in_h - 1 - x; sx = in_w - 1 - y; break;
    }
}

inline bool dihedral_swaps_axes(Dihedral g) {
    return g == Dihedral::r90 || g == Dihedral::r270 || g == Dihedral::flip_r90 || g == Dihedral::flip_r270;
}

}  // namespace

NormalizedImage apply_dihedral(Dihedral g, const NormalizedImage& img) {
    require(img.ndim() == 3 && img.dim(0) == 3, "image: dihedral expects a 3xHxW tensor");
    const int h = img.dim(1);
    const int w = img.dim(2);
    require(h == w || !dihedral_swaps_axes(g),
            std::string("image: ") + dihedral_name(g) + " requires a square image, got " + std::to_string(w) + "x" +
                std::to_string(h));
    Tensor out = Tensor::zeros({3, h, w});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                int sy, sx;
                dihedral_src(g, y, x, h, w, sy, sx);
                out.data[out.idx3(c, y, x)] = img.data[img.idx3(c, sy, sx)];
            }
        }
    }
    return out;
}

ImageBuffer apply_dihedral(Dihedral g, const ImageBuffer& img) {
    require(img.width > 0 && img.height > 0, "image: dihedral on empty image");
    require(img.height == img.width || !dihedral_swaps_axes(g),
            std::string("image: ") + dihedral_name(g) + " requires a square image, got " + std::to_string(img.width) +
                "x" + std::to_string(img.height));
    ImageBuffer out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int sy, sx;
            dihedral_src(g, y, x, img.height, img.width, sy, sx);
            for (int c = 0; c < 3; ++c) out.set(y, x, c, img.sample(sy, sx, c));
        }
    }
    return out;
}

ScalePair preprocess_pair(const ImageBuffer& img, const PreprocessPlan& plan) {
    require(plan.coarse_size > 0 && plan.fine_resize > 0 && plan.crop_size > 0, "image: preprocess sizes must be positive");
    require(plan.crop_size <= plan.fine_resize, "image: crop_size must not exceed fine_resize");
    const NormalizedImage unit = rescale_to_unit(img);
    ScalePair out;
    out.coarse = resize_bilinear(unit, plan.coarse_size, plan.coarse_size);
    out.fine = center_crop(resize_bilinear(unit, plan.fine_resize, plan.fine_resize), plan.crop_size);
    return out;
}

}  // namespace lesionnet
