#pragma once

#include <filesystem>

#include <torch/torch.h>

namespace freqforge::harness {

/// Reads a binary PPM (P6) or PGM (P5) with maxval 255 into a float (c, h, w) tensor in [0, 1].
torch::Tensor read_image(const std::filesystem::path& path);

/// Writes (3, h, w) as P6 or (1, h, w) / (h, w) as P5, rounding to 8 bits after clamping to [0, 1].
void write_image(const std::filesystem::path& path, const torch::Tensor& pixels);

/// The 8-bit quantization write_image applies, without touching disk.
torch::Tensor quantize_8bit(const torch::Tensor& pixels);

} // namespace freqforge::harness
