#include "lesionnet/ops.hpp"

#include <algorithm>
#include <cmath>

namespace lesionnet::ops {

namespace {

void check_conv_shapes(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    require(input.ndim() == 3, "conv2d: input must be [C,H,W], got " + shape_str(input.shape));
    require(kernel.ndim() == 4 && kernel.dim(2) == 3 && kernel.dim(3) == 3,
            "conv2d: kernel must be [C_out,C_in,3,3], got " + shape_str(kernel.shape));
    require(kernel.dim(1) == input.dim(0),
            "conv2d: shape error: input has " + std::to_string(input.dim(0)) +
                " channels but kernel expects " + std::to_string(kernel.dim(1)));
    require(bias.ndim() == 1 && bias.dim(0) == kernel.dim(0),
            "conv2d: bias must be [C_out], got " + shape_str(bias.shape));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    check_conv_shapes(input, kernel, bias);
    const int c_in = input.dim(0);
    const int h = input.dim(1);
    const int w = input.dim(2);
    const int c_out = kernel.dim(0);

    Tensor out({c_out, h, w});
    std::vector<double> acc(static_cast<std::size_t>(w));
    for (int o = 0; o < c_out; ++o) {
        for (int y = 0; y < h; ++y) {
            std::fill(acc.begin(), acc.end(), bias[static_cast<std::size_t>(o)]);
            // Accumulation order per output element: c outermost, dx, dy innermost.
            // Each acc[x] is an independent accumulator, so vectorizing over x
            // keeps that order intact.
            for (int c = 0; c < c_in; ++c) {
                for (int dx = 0; dx < 3; ++dx) {
                    const int x_lo = std::max(0, 1 - dx);
                    const int x_hi = std::min(w, w + 1 - dx);
                    for (int dy = 0; dy < 3; ++dy) {
                        const int iy = y + dy - 1;
                        if (iy < 0 || iy >= h) {
                            continue;
                        }
                        const double kv =
                            kernel.data[((static_cast<std::size_t>(o) * static_cast<std::size_t>(c_in) +
                                          static_cast<std::size_t>(c)) *
                                             3 +
                                         static_cast<std::size_t>(dy)) *
                                            3 +
                                        static_cast<std::size_t>(dx)];
                        const double* row = input.data.data() + input.idx3(c, iy, 0);
                        for (int x = x_lo; x < x_hi; ++x) {
                            acc[static_cast<std::size_t>(x)] += kv * row[x + dx - 1];
                        }
                    }
                }
            }
            std::copy(acc.begin(), acc.end(), out.data.begin() + static_cast<std::ptrdiff_t>(out.idx3(o, y, 0)));
        }
    }
    return out;
}

Tensor maxpool2(const Tensor& input, std::vector<std::int32_t>* argmax) {
    require(input.ndim() == 3, "maxpool2: input must be [C,H,W], got " + shape_str(input.shape));
    const int c = input.dim(0);
    const int h = input.dim(1);
    const int w = input.dim(2);
    require(h % 2 == 0 && w % 2 == 0,
            "maxpool2: H and W must be even, got " + shape_str(input.shape));

    Tensor out({c, h / 2, w / 2});
    if (argmax != nullptr) {
        argmax->assign(out.size(), 0);
    }
    std::size_t oi = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; y += 2) {
            for (int x = 0; x < w; x += 2) {
                // Window scanned in row-major order; strict > keeps the first
                // maximum on ties.
                std::size_t best = input.idx3(ch, y, x);
                double best_v = input.data[best];
                const std::size_t cand[3] = {input.idx3(ch, y, x + 1), input.idx3(ch, y + 1, x),
                                             input.idx3(ch, y + 1, x + 1)};
                for (std::size_t k : cand) {
                    if (input.data[k] > best_v) {
                        best_v = input.data[k];
                        best = k;
                    }
                }
                out.data[oi] = best_v;
                if (argmax != nullptr) {
                    (*argmax)[oi] = static_cast<std::int32_t>(best);
                }
                ++oi;
            }
        }
    }
    return out;
}

Tensor global_avg_pool(const Tensor& input) {
    require(input.ndim() == 3, "global_avg_pool: input must be [C,H,W], got " + shape_str(input.shape));
    const int c = input.dim(0);
    const std::size_t hw = static_cast<std::size_t>(input.dim(1)) * static_cast<std::size_t>(input.dim(2));
    Tensor out({c});
    for (int ch = 0; ch < c; ++ch) {
        const double* p = input.data.data() + input.idx3(ch, 0, 0);
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            s += p[i];
        }
        out.data[static_cast<std::size_t>(ch)] = s / static_cast<double>(hw);
    }
    return out;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require(input.ndim() == 1, "dense: input must be a vector, got " + shape_str(input.shape));
    require(weight.ndim() == 2, "dense: weight must be [N_out,N_in], got " + shape_str(weight.shape));
    require(weight.dim(1) == input.dim(0),
            "dense: shape mismatch: weight " + shape_str(weight.shape) + " vs input " +
                shape_str(input.shape));
    require(bias.ndim() == 1 && bias.dim(0) == weight.dim(0),
            "dense: bias must be [N_out], got " + shape_str(bias.shape));

    const int n_out = weight.dim(0);
    const int n_in = weight.dim(1);
    Tensor out({n_out});
    for (int o = 0; o < n_out; ++o) {
        const double* wr = weight.data.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(n_in);
        double s = bias.data[static_cast<std::size_t>(o)];
        for (int i = 0; i < n_in; ++i) {
            s += wr[i] * input.data[static_cast<std::size_t>(i)];
        }
        out.data[static_cast<std::size_t>(o)] = s;
    }
    return out;
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (auto& v : out.data) {
        v = v > 0.0 ? v : 0.0;
    }
    return out;
}

Tensor softmax(const Tensor& logits) {
    require(logits.ndim() == 1 && logits.dim(0) >= 2,
            "softmax: input must be a vector of K >= 2 logits, got " + shape_str(logits.shape));
    double mx = logits.data[0];
    for (double v : logits.data) {
        mx = std::max(mx, v);
    }
    Tensor out({logits.dim(0)});
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.data[i] = std::exp(logits.data[i] - mx);
        sum += out.data[i];
    }
    for (auto& v : out.data) {
        v /= sum;
    }
    return out;
}

double cross_entropy(const Tensor& probs, int true_class) {
    require(probs.ndim() == 1, "cross_entropy: probs must be a vector, got " + shape_str(probs.shape));
    require(true_class >= 0 && true_class < probs.dim(0),
            "cross_entropy: class index " + std::to_string(true_class) + " out of range for " +
                shape_str(probs.shape));
    const double p = std::max(probs.data[static_cast<std::size_t>(true_class)], kProbClamp);
    return -std::log(p);
}

}  // namespace lesionnet::ops
