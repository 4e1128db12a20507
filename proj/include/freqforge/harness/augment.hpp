#pragma once

#include <cstdint>
#include <random>
#include <string>

#include <torch/torch.h>

namespace freqforge::harness {

using Rng = std::mt19937_64;

/// Stream keyed by (seed, a, b, ...), independent of the order streams are created in.
Rng make_rng(uint64_t seed, std::initializer_list<uint64_t> keys);

// Individual perturbations on a (c, h, w) float image in [0, 1]. Outputs stay in [0, 1].

torch::Tensor crop_resize(const torch::Tensor& image, double scale, double fx, double fy);
torch::Tensor adjust_contrast(const torch::Tensor& image, double factor);
torch::Tensor gaussian_blur(const torch::Tensor& image, double sigma);
torch::Tensor rotate(const torch::Tensor& image, double degrees);
torch::Tensor grayscale(const torch::Tensor& image);

/// IJG-scaled JPEG luminance table for quality in [1, 100], in 8-bit units, row-major 8x8.
std::array<int, 64> jpeg_quant_table(int quality);

/// IJG-scaled JPEG chrominance table.
std::array<int, 64> jpeg_chroma_table(int quality);

/**
 * Baseline-JPEG proxy without entropy coding: YCbCr conversion, 4:2:0 chroma
 * subsampling, 8x8 DCT quantization with the scaled luminance and chrominance
 * tables, and reconstruction. Single-channel images only go through the luma path.
 */
torch::Tensor compress(const torch::Tensor& image, int quality);

torch::Tensor gaussian_noise(const torch::Tensor& image, double sigma, Rng& rng);

/// Poisson-Gaussian sensor noise: gain * Poisson(x / gain) + N(0, read^2).
torch::Tensor iso_noise(const torch::Tensor& image, double gain, double read_sigma, Rng& rng);

/// Per-operation probabilities and parameter ranges. All probabilities zero is the identity.
struct AugmentPolicy {
    double crop = 0, contrast = 0, blur = 0, rotate = 0, grayscale = 0;
    double compress = 0, gauss = 0, iso = 0;

    double crop_min_scale = 0.8;
    double contrast_range = 0.2; // factor in [1 - r, 1 + r]
    double blur_sigma_max = 1.0;
    double rotate_degrees = 15.0;
    int quality_min = 40, quality_max = 90;
    double gauss_sigma_max = 0.1;
    double iso_gain_max = 0.04;
    double iso_read_max = 0.02;

    bool identity() const noexcept;

    /// Probabilities in [0, 1] and sane ranges; throws ConfigError.
    void validate() const;
};

/// Applies the sampled subset in a fixed order: crop, rotate, contrast, blur, grayscale, compress, gauss, iso.
torch::Tensor augment(const torch::Tensor& image, const AugmentPolicy& policy, Rng& rng);

/// Test-time perturbation with a fixed severity.
struct Degradation {
    enum class Kind { none, compression, gaussian, iso };
    Kind kind = Kind::none;
    int quality = 50;
    double sigma = 0.08;
    double iso_gain = 0.03;
    double iso_read = 0.01;

    std::string name() const;
    torch::Tensor apply(const torch::Tensor& image, Rng& rng) const;
};

Degradation::Kind parse_degradation(const std::string& name);

} // namespace freqforge::harness
