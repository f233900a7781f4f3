#pragma once

// Independent reference implementations and helpers shared by the test
// suites. Oracles deliberately use the plainest possible formulation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lesionnet/rng.hpp"
#include "lesionnet/tensor.hpp"

namespace test_support {

inline lesionnet::Tensor random_tensor(const std::vector<int>& shape, lesionnet::Rng& rng, double lo = -1.0,
                                       double hi = 1.0) {
    lesionnet::Tensor t = lesionnet::Tensor::zeros(shape);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

/// Direct-summation convolution in the mandated accumulation order:
/// bias first, then dy innermost, dx, input channel outermost.
inline lesionnet::Tensor conv2d_oracle(const lesionnet::Tensor& input, const lesionnet::Tensor& kernel,
                                       const lesionnet::Tensor& bias) {
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = kernel.dim(0);
    lesionnet::Tensor out = lesionnet::Tensor::zeros({c_out, h, w});
    for (int o = 0; o < c_out; ++o) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = bias.data[static_cast<std::size_t>(o)];
                for (int c = 0; c < c_in; ++c) {
                    for (int dx = 0; dx < 3; ++dx) {
                        for (int dy = 0; dy < 3; ++dy) {
                            const int iy = y + dy - 1, ix = x + dx - 1;
                            const double v = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                                 ? input.data[input.idx3(c, iy, ix)]
                                                 : 0.0;
                            acc += kernel.data[((static_cast<std::size_t>(o) * c_in + c) * 3 + dy) * 3 + dx] * v;
                        }
                    }
                }
                out.data[out.idx3(o, y, x)] = acc;
            }
        }
    }
    return out;
}

/// O(n^2) tie-aware pair counting, same +-0.5 tie credit as roc_auc.
inline double auc_pair_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double numerator = 0.0;
    long p = 0, n = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            ++p;
            for (std::size_t j = 0; j < labels.size(); ++j) {
                if (labels[j] == 0) {
                    if (scores[i] > scores[j]) numerator += 1.0;
                    else if (scores[i] == scores[j]) numerator += 0.5;
                }
            }
        } else {
            ++n;
        }
    }
    return numerator / (static_cast<double>(p) * static_cast<double>(n));
}

inline double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Central finite difference of a scalar-valued closure with respect to one
/// double slot. The closure must re-evaluate from scratch on every call.
inline double central_diff(double& slot, const std::function<double()>& f, double h = 1e-5) {
    const double saved = slot;
    slot = saved + h;
    const double up = f();
    slot = saved - h;
    const double down = f();
    slot = saved;
    return (up - down) / (2.0 * h);
}

/// Self-deleting scratch directory under the system temp path.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        for (int attempt = 0; attempt < 16; ++attempt) {
            std::filesystem::path candidate =
                std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path = candidate;
                return;
            }
        }
        throw std::runtime_error("tempdir: cannot create scratch directory for " + tag);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

}  // namespace test_support
