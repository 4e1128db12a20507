#pragma once

#include <utility>
#include <vector>

#include <torch/torch.h>

#include "freqforge/freq.hpp"

namespace freqforge::dfcs {

inline constexpr int kDefaultK = 8;
/// Floor on the pooled spectrum when it divides the fused scores.
inline constexpr double kPooledFloor = 1e-6;

struct AttentionOptions {
    int64_t hidden = 16;
    double alpha_rc = 0.5;
    /// Replaces the rectifier between the two 1x1 maps by the identity.
    bool linear_activation = false;
};

/**
 * Learnable part of the importance scores: psi applied to the separable
 * row/column interaction of the pooled 8x8 spectrum.
 *
 * psi is two bias-free 1x1 maps over the 64 band channels (64 -> hidden -> 64)
 * with a rectifier between them.
 */
class RowColumnAttentionImpl : public torch::nn::Module {
public:
    explicit RowColumnAttentionImpl(const AttentionOptions& options = {});

    /// pooled: (n, 64) or (64). Returns A_rc with the same shape.
    torch::Tensor forward(const torch::Tensor& pooled);

    /// r c^T / sum(G) for each pooled map; rank one, same scale as the pooled spectrum.
    static torch::Tensor interaction(const torch::Tensor& pooled);

    const AttentionOptions& options() const noexcept { return options_; }
    torch::nn::Linear& mix_in() { return mix_in_; }
    torch::nn::Linear& mix_out() { return mix_out_; }

private:
    AttentionOptions options_;
    torch::nn::Linear mix_in_{nullptr};
    torch::nn::Linear mix_out_{nullptr};
};
TORCH_MODULE(RowColumnAttention);

struct ChannelImportance {
    std::vector<double> scores; // A*, 64 entries
    freq::ChannelSet primary;
    freq::ChannelSet secondary;

    /// scores reshaped row-major to 8x8.
    torch::Tensor map8x8() const;
};

/// G(F): mean |coeff| over color channels and blocks. (64) or (n, 64).
torch::Tensor pooled_spectrum(const freq::FrequencyTensor& freq);

/// A_rc for an 8x8 pooled map (or a 64-vector / (n, 64) batch).
torch::Tensor row_column_attention(const torch::Tensor& pooled, RowColumnAttention& attention);

/// A* = G(F) + alpha * A_rc. (64) or (n, 64), differentiable in the attention parameters.
torch::Tensor fused_scores(const freq::FrequencyTensor& freq, RowColumnAttention& attention);

/// Top-K and ranks K+1..2K under (score desc, zigzag rank asc). Throws ConfigError if 2K > 64 or K < 1.
std::pair<freq::ChannelSet, freq::ChannelSet> select_channels(std::span<const double> scores, int k);

/// Single-image importance (unbatched FrequencyTensor).
ChannelImportance fused_attention(const freq::FrequencyTensor& freq, RowColumnAttention& attention, int k);

struct BranchInputs {
    torch::Tensor rgb;       // untouched input
    torch::Tensor primary;   // top-K reconstruction, full range
    torch::Tensor secondary; // ranks K+1..2K reconstruction, full range
    torch::Tensor scores;    // A*, (n, 64)
    torch::Tensor primary_mask;   // (n, 64)
    torch::Tensor secondary_mask; // (n, 64)
    std::vector<ChannelImportance> importance;
};

/**
 * Reconstructs both band-selected images from precomputed scores.
 *
 * Selection is hard; kept band b is multiplied by A*_b / G_b, the fused score
 * relative to the pooled spectrum of the same image. The weight is 1 wherever
 * the row-column term is zero, and its derivative carries gradient into A*.
 */
BranchInputs branch_inputs_from_scores(const freq::Image& image, const freq::FrequencyTensor& freq,
                                       const torch::Tensor& scores, int k);

/// Full pipeline for an image or batch: pad, DCT, score, select, reconstruct, crop.
BranchInputs make_branch_inputs(const freq::Image& image, RowColumnAttention& attention, int k);

} // namespace freqforge::dfcs
