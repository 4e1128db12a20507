#pragma once

#include <vector>

#include <torch/torch.h>

namespace freqforge::cfce {

inline constexpr double kCosineEps = 1e-8;

/**
 * Cross-channel cosine map S[i, j] = <f1_i, f2_j> / (|f1_i| |f2_j| + eps),
 * channels flattened over (H, W). Inputs (C, H, W) or (n, C, H, W); output
 * (C, C) or (n, C, C). An all-zero channel yields a zero row/column.
 */
torch::Tensor cosine_map(const torch::Tensor& f1, const torch::Tensor& f2);

/**
 * Merge of the primary/secondary frequency features:
 *   0.5 (f1 + softmax_row(S) f2) + 0.5 (f2 + softmax_row(S^T) f1)
 * Symmetric in (f1, f2); output has the input shape.
 */
torch::Tensor enhance(const torch::Tensor& f1, const torch::Tensor& f2);

/// enhance applied stage by stage.
std::vector<torch::Tensor> enhance_stages(const std::vector<torch::Tensor>& f1, const std::vector<torch::Tensor>& f2);

} // namespace freqforge::cfce
