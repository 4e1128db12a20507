#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace freqforge::gfm {

struct GfmOptions {
    int64_t reduced_channels = 128; // C
    int64_t gamma_channels = 128;   // C_gamma
    int64_t global_channels = 64;   // C_G, must be < C_gamma
    int64_t num_classes = 2;
};

/// Stage-wise channel concatenation of two hierarchical streams (F_c formation).
std::vector<torch::Tensor> pair_stages(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b);

/// Antialiased bilinear resampling to (height, width); identity when already that size.
torch::Tensor resample(const torch::Tensor& x, int64_t height, int64_t width);

/// x0..x5 resampled to the spatial size of x5 and concatenated along channels.
torch::Tensor multiscale_concat(const std::vector<torch::Tensor>& stages);

/// 1x1 depthwise-separable reduction C' -> C: per-channel scale then pointwise mix, bias-free.
class ReduceImpl : public torch::nn::Module {
public:
    ReduceImpl(int64_t in_channels, int64_t out_channels);
    torch::Tensor forward(const torch::Tensor& x);

    torch::Tensor depthwise_scale; // (C')
    torch::Tensor pointwise;       // (C, C')
};
TORCH_MODULE(Reduce);

/// gamma = W1 reduced + W2 resample(x6); both maps 1x1 and bias-free.
class LinearFuseImpl : public torch::nn::Module {
public:
    LinearFuseImpl(int64_t reduced_channels, int64_t top_channels, int64_t gamma_channels);
    torch::Tensor forward(const torch::Tensor& reduced, const torch::Tensor& x6);

    torch::nn::Conv2d from_reduced{nullptr};
    torch::nn::Conv2d from_top{nullptr};
};
TORCH_MODULE(LinearFuse);

/// 1x1 reduction C_gamma -> C_G followed by global average pooling.
class CompressImpl : public torch::nn::Module {
public:
    CompressImpl(int64_t gamma_channels, int64_t global_channels);
    torch::Tensor forward(const torch::Tensor& gamma);

    torch::nn::Conv2d reduce{nullptr};
};
TORCH_MODULE(Compress);

struct FusedFeature {
    torch::Tensor gamma; // (n, C_gamma, H5, W5)
    torch::Tensor global; // (n, C_G)
};

/// Concat -> reduce -> linear fuse with x6 -> compress.
class GlobalFusionImpl : public torch::nn::Module {
public:
    /// stage_channels: channels of each (paired) stage x0..x6.
    GlobalFusionImpl(const std::array<int64_t, 7>& stage_channels, const GfmOptions& options = {});

    FusedFeature forward(const std::vector<torch::Tensor>& stages);

    const GfmOptions& options() const noexcept { return options_; }

    Reduce reduce{nullptr};
    LinearFuse fuse{nullptr};
    Compress compress{nullptr};

private:
    GfmOptions options_;
};
TORCH_MODULE(GlobalFusion);

struct Predictions {
    torch::Tensor logits;    // final decision logits (from G)
    torch::Tensor p_global;  // P_G
    torch::Tensor p_gamma;   // P_gamma
    torch::Tensor p_full;    // P_F
    std::array<torch::Tensor, 2> p_left_out; // P_{F \ f_c1}, P_{F \ f_c2}
};

/// Classifier heads. The joint head is only built when joint_width > 0.
class HeadsImpl : public torch::nn::Module {
public:
    HeadsImpl(int64_t gamma_channels, int64_t global_channels, int64_t joint_width, int64_t num_classes = 2);

    torch::nn::Linear gamma_head{nullptr};
    torch::nn::Linear g_head{nullptr};
    torch::nn::Linear joint_head{nullptr};
};
TORCH_MODULE(Heads);

/**
 * All distributions of one forward pass. joint may be undefined (no joint head);
 * joint_first_width is the width of the RGB slice inside joint.
 */
Predictions predict(Heads& heads, const torch::Tensor& joint, int64_t joint_first_width, const FusedFeature& fused);

} // namespace freqforge::gfm
