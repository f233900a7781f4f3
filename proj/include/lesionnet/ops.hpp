#pragma once

#include <cstdint>
#include <vector>

#include "lesionnet/tensor.hpp"

namespace lesionnet::ops {

/// 3x3 convolution with zero padding of width 1, stride 1.
/// input [C_in,H,W], kernel [C_out,C_in,3,3], bias [C_out] -> [C_out,H,W].
/// Per output element the summation runs dy innermost, then dx, then input
/// channel outermost; out-of-range taps contribute nothing.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);

/// 2x2 non-overlapping max pooling; H and W must be even.
/// When argmax is non-null it receives, per output element, the flat input
/// index of the selected element (first in row-major order on ties).
Tensor maxpool2(const Tensor& input, std::vector<std::int32_t>* argmax = nullptr);

/// Spatial mean per channel: [C,H,W] -> [C].
Tensor global_avg_pool(const Tensor& input);

/// weight [N_out,N_in] * input [N_in] + bias [N_out].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& input);

/// Max-shifted softmax over a vector of K >= 2 logits.
Tensor softmax(const Tensor& logits);

/// -ln(probs[true_class]) with the probability clamped below at 1e-12.
double cross_entropy(const Tensor& probs, int true_class);

constexpr double kProbClamp = 1e-12;

}  // namespace lesionnet::ops
