#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace freqforge::backbone {

inline constexpr int kStages = 7;

enum class Profile { tiny, full };

Profile parse_profile(const std::string& name);
std::string to_string(Profile profile);

struct BackboneConfig {
    Profile profile = Profile::tiny;
    std::array<int64_t, kStages> channels{8, 16, 32, 64, 64, 128, 128};
    bool share_frequency_weights = false;

    static BackboneConfig tiny();
    /// Xception-width separable variant meant for 299x299 inputs.
    static BackboneConfig full();

    /// Smallest accepted input side.
    int64_t min_input() const noexcept { return 32; }
    void validate() const;
};

/// Encoder stage outputs x0..x6, each (n, C_i, H_i, W_i).
struct HierarchicalFeatures {
    std::vector<torch::Tensor> stages;

    const torch::Tensor& operator[](std::size_t i) const { return stages.at(i); }
    std::size_t size() const noexcept { return stages.size(); }
    void validate() const;
};

/**
 * Seven conv-BN-ReLU stages, stride 2 at stages 0..4.
 *
 * The tiny profile uses dense 3x3 convolutions; the full profile uses a dense
 * stem followed by depthwise-separable stages.
 */
class EncoderImpl : public torch::nn::Module {
public:
    explicit EncoderImpl(const BackboneConfig& config = BackboneConfig::tiny(), int64_t in_channels = 3);

    HierarchicalFeatures forward(const torch::Tensor& image);

    const BackboneConfig& config() const noexcept { return config_; }

private:
    BackboneConfig config_;
    std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(Encoder);

/// Fan-in scaled uniform bound sqrt(6 / fan_in) used by init_params.
double init_bound(const torch::Tensor& weight);

/**
 * Reproducible initialization of every parameter of a module tree:
 * weights with rank >= 2 ~ U(-b, b) with b = init_bound, rank-1 weights (norm
 * scales) = 1, biases and everything else = 0.
 */
void init_params(torch::nn::Module& module, uint64_t seed);

/// Convenience: fresh encoder initialized from seed.
Encoder make_encoder(const BackboneConfig& config, uint64_t seed, int64_t in_channels = 3);

} // namespace freqforge::backbone
