#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <torch/torch.h>

namespace freqforge::freq {

inline constexpr int64_t kBlock = 8;
inline constexpr int64_t kBands = kBlock * kBlock;

/// Row-major band index of DCT frequency (u, v): b = 8u + v.
constexpr int band_index(int u, int v) noexcept { return u * 8 + v; }
constexpr int band_row(int band) noexcept { return band / 8; }
constexpr int band_col(int band) noexcept { return band % 8; }

/// Bands in JPEG zigzag traversal order (low to high perceptual frequency).
const std::array<int, 64>& zigzag_order();
/// zigzag_rank()[b] is the position of band b in zigzag_order().
const std::array<int, 64>& zigzag_rank();

/// Orthonormal type-II DCT matrix D with D[u][x] = c(u) cos((2x + 1) u pi / 16).
torch::Tensor dct_matrix(torch::Dtype dtype = torch::kFloat32);

/**
 * Pixel tensor of shape (c, h, w) or (n, c, h, w) with values nominally in [0, 1].
 *
 * Masked reconstructions are also carried as Image and may leave [0, 1]; the range
 * is only enforced when an image is handed to an encoder.
 */
class Image {
public:
    Image() = default;
    explicit Image(torch::Tensor pixels);

    const torch::Tensor& pixels() const noexcept { return pixels_; }
    bool batched() const noexcept { return pixels_.dim() == 4; }
    int64_t channels() const { return pixels_.size(-3); }
    int64_t height() const { return pixels_.size(-2); }
    int64_t width() const { return pixels_.size(-1); }

private:
    torch::Tensor pixels_;
};

/// Block-DCT coefficients, shape (c, 64, h/8, w/8) or (n, c, 64, h/8, w/8).
class FrequencyTensor {
public:
    FrequencyTensor() = default;
    explicit FrequencyTensor(torch::Tensor coeffs);

    const torch::Tensor& coeffs() const noexcept { return coeffs_; }
    bool batched() const noexcept { return coeffs_.dim() == 5; }
    int64_t channels() const { return coeffs_.size(-4); }
    int64_t blocks_high() const { return coeffs_.size(-2); }
    int64_t blocks_wide() const { return coeffs_.size(-1); }

private:
    torch::Tensor coeffs_;
};

/// Distinct band indices kept in zigzag order.
class ChannelSet {
public:
    ChannelSet() = default;
    /// Throws InvalidInput on out-of-range or duplicate indices.
    explicit ChannelSet(std::span<const int> bands);
    ChannelSet(std::initializer_list<int> bands);

    static ChannelSet all();

    const std::vector<int>& indices() const noexcept { return indices_; }
    std::size_t size() const noexcept { return indices_.size(); }
    bool empty() const noexcept { return indices_.empty(); }
    bool contains(int band) const;

    /// 64-vector with ones at kept bands.
    torch::Tensor mask(torch::Dtype dtype = torch::kFloat32) const;

    friend bool operator==(const ChannelSet&, const ChannelSet&) = default;

private:
    std::vector<int> indices_;
};

/// Orthonormal 8x8 block DCT per color channel. Throws InvalidInput unless h, w are multiples of 8.
FrequencyTensor block_dct(const Image& image);

/// Exact inverse of block_dct. No clamping.
Image block_idct(const FrequencyTensor& freq);

/**
 * Zeroes every band outside the mask, scales the kept ones and inverts.
 *
 * mask and weights are 64-vectors or (n, 64) matrices for per-sample selection
 * on a batched tensor. Differentiable in both freq and weights.
 */
Image reconstruct_masked(const FrequencyTensor& freq, const torch::Tensor& mask,
                         const std::optional<torch::Tensor>& weights = std::nullopt);

/// Same as reconstruct_masked with a single set; empty sets are rejected.
Image reconstruct_from_channels(const FrequencyTensor& freq, const ChannelSet& channels,
                                const std::optional<torch::Tensor>& weights = std::nullopt);

/// Reflect-pads h and w up to the next multiple of 8 (replicate for tiny inputs).
Image pad_to_blocks(const Image& image);

/// Crops the bottom/right padding added by pad_to_blocks.
Image crop(const Image& image, int64_t height, int64_t width);

/// Clamp applied when a (possibly band-passed) image enters an encoder branch.
torch::Tensor to_encoder_range(const torch::Tensor& pixels);

/// Per-band energy summed over channels and blocks, as a 64-vector (double).
std::vector<double> band_energy(const FrequencyTensor& freq);

} // namespace freqforge::freq
