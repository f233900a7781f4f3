#include "lesionnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>
#include <utility>

namespace lesionnet {

namespace {

constexpr double kNoiseSigma = 4.0 / 255.0;

struct BlobParams {
    double bg[3];      // background, unit scale
    double color[3];   // lesion base color, unit scale
    double base_r;     // nominal radius, px
    double cx, cy;     // center, px
    // melanoma only
    bool asymmetric = false;
    double quad[4] = {1, 1, 1, 1};
    double harm_amp[3] = {0, 0, 0};
    double harm_phase[3] = {0, 0, 0};
    double patch_angle = 0;
    double color2[3] = {0, 0, 0};
    // seborrheic keratosis only
    double checker_amp = 0;
    double edge = 2.5;
};

constexpr int kHarmonics[3] = {3, 5, 7};

// Parameter draw order is fixed, and the class-independent prefix comes
// first, so two classes rendered from equal seeds share the same blob
// geometry (needed for the texture-energy comparison).
BlobParams draw_params(ClassLabel cls, Rng& rng, int native_size) {
    const double s = native_size / 256.0;  // keep pixel-unit magnitudes proportional
    BlobParams p;
    const double base_bg[3] = {205, 175, 149};
    for (int c = 0; c < 3; ++c) p.bg[c] = (base_bg[c] + rng.uniform(-12.0, 12.0)) / 255.0;
    p.color[0] = rng.uniform(95.0, 130.0) / 255.0;
    p.color[1] = rng.uniform(60.0, 88.0) / 255.0;
    p.color[2] = rng.uniform(45.0, 68.0) / 255.0;
    p.base_r = rng.uniform(0.22, 0.30) * native_size;
    p.cx = 0.5 * native_size + rng.uniform(-0.75, 0.75) * s;
    p.cy = 0.5 * native_size + rng.uniform(-1.5, 1.5) * s;
    p.edge = 2.5 * s;

    if (cls == ClassLabel::melanoma) {
        p.asymmetric = true;
        const double off = rng.uniform(8.0, 16.0) * s;
        p.cx += (rng.uniform() < 0.5 ? -off : off);
        for (int i = 0; i < 4; ++i) p.quad[i] = rng.uniform(0.7, 1.3);
        for (int i = 0; i < 3; ++i) {
            p.harm_amp[i] = rng.uniform(2.5, 5.0) * s;
            p.harm_phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        p.patch_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        p.color2[0] = rng.uniform(38.0, 70.0) / 255.0;
        p.color2[1] = rng.uniform(25.0, 48.0) / 255.0;
        p.color2[2] = rng.uniform(18.0, 40.0) / 255.0;
        p.edge = 1.5 * s;
    } else if (cls == ClassLabel::seborrheic_keratosis) {
        p.checker_amp = rng.uniform(24.0, 32.0) / 255.0;
    }
    return p;
}

// Border radius at angle theta (radians).
double blob_radius(const BlobParams& p, double theta) {
    if (!p.asymmetric) return p.base_r;
    const double u = (theta + std::numbers::pi) / (0.5 * std::numbers::pi);  // [0, 4]
    const int i = std::min(3, static_cast<int>(u));
    const double t = u - i;
    const double qf = p.quad[i] * (1.0 - t) + p.quad[(i + 1) % 4] * t;
    double r = p.base_r * qf;
    for (int h = 0; h < 3; ++h) r += p.harm_amp[h] * std::sin(kHarmonics[h] * theta + p.harm_phase[h]);
    return r;
}

// +1 on even 2x2 cells, -1 on odd: a checker of period 4 px aligned to
// absolute even pixel coordinates.
inline double checker_sign(int y, int x) { return ((y / 2 + x / 2) % 2 == 0) ? 1.0 : -1.0; }

}  // namespace

SynthRender synth_render(ClassLabel cls, Rng& rng, int native_size) {
    require(native_size >= 128, "synth: native_size must be at least 128, got " + std::to_string(native_size));
    const BlobParams p = draw_params(cls, rng, native_size);
    const double s = native_size / 256.0;

    SynthRender out;
    out.size = native_size;
    out.image = ImageBuffer(native_size, native_size);
    out.mask.assign(static_cast<std::size_t>(native_size) * native_size, 0);

    const double patch_dir_x = std::cos(p.patch_angle);
    const double patch_dir_y = std::sin(p.patch_angle);
    for (int y = 0; y < native_size; ++y) {
        for (int x = 0; x < native_size; ++x) {
            const double dx = x - p.cx;
            const double dy = y - p.cy;
            const double d = std::hypot(dx, dy);
            const double r = blob_radius(p, std::atan2(dy, dx));
            const double alpha = std::clamp((r - d) / p.edge + 0.5, 0.0, 1.0);
            if (d <= r) out.mask[static_cast<std::size_t>(y) * native_size + x] = 1;

            double fg[3] = {p.color[0], p.color[1], p.color[2]};
            if (p.asymmetric) {
                const double proj = dx * patch_dir_x + dy * patch_dir_y;
                const double t2 = std::clamp((proj - 0.2 * p.base_r) / (4.0 * s), 0.0, 1.0);
                for (int c = 0; c < 3; ++c) fg[c] = fg[c] * (1.0 - t2) + p.color2[c] * t2;
            }
            const double tex = p.checker_amp * checker_sign(y, x) * alpha;
            for (int c = 0; c < 3; ++c) {
                double v = p.bg[c] * (1.0 - alpha) + fg[c] * alpha + tex;
                v += rng.normal(0.0, kNoiseSigma);
                v = std::clamp(v, 0.0, 1.0);
                out.image.pixels[out.image.idx(y, x) + c] = static_cast<std::uint8_t>(v * 255.0 + 0.5);
            }
        }
    }
    return out;
}

ImageBuffer synth_generate(ClassLabel cls, Rng& rng, int native_size) {
    return synth_render(cls, rng, native_size).image;
}

void synth_dataset(const std::filesystem::path& out_dir, int n_train_per_class, int n_test_per_class,
                   std::uint64_t seed) {
    require(n_train_per_class >= 0 && n_test_per_class >= 0, "synth: per-class counts must be non-negative");
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    require(!ec, "synth: cannot create " + (out_dir / "images").string() + ": " + ec.message());

    Rng rng(seed);
    const std::pair<const char*, int> splits[2] = {{"train", n_train_per_class}, {"test", n_test_per_class}};
    for (const auto& [split, count] : splits) {
        std::ofstream csv(out_dir / (std::string(split) + ".csv"), std::ios::binary);
        require(static_cast<bool>(csv), "synth: cannot write " + (out_dir / (std::string(split) + ".csv")).string());
        csv << "image_id,path,label\n";
        for (int cls = 0; cls < kNumClasses; ++cls) {
            const ClassLabel label = static_cast<ClassLabel>(cls);
            for (int i = 0; i < count; ++i) {
                char idx[16];
                std::snprintf(idx, sizeof(idx), "%04d", i);
                const std::string id = std::string(split) + "_" + class_name(label) + "_" + idx;
                const std::string rel = "images/" + id + ".ppm";
                save_ppm(synth_generate(label, rng), out_dir / rel);
                csv << id << "," << rel << "," << class_name(label) << "\n";
            }
        }
        require(static_cast<bool>(csv), "synth: write failed for " + std::string(split) + ".csv");
    }
}

}  // namespace lesionnet
