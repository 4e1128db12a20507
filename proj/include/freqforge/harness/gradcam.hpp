#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

#include "freqforge/network.hpp"

namespace freqforge::harness {

enum class Branch { rgb, primary, secondary };

std::string to_string(Branch branch);
Branch parse_branch(const std::string& name);

/// Branches the variant actually has, in rgb, primary, secondary order.
std::vector<Branch> available_branches(const network::NetworkConfig& config);

/**
 * Grad-CAM of the fake-class margin (logit_fake - logit_real) at the last
 * stage of one branch: channel weights are the spatially averaged gradients,
 * the weighted sum goes through ReLU, is bilinearly upsampled to the image
 * size and min-max normalized. A constant map becomes all zeros.
 *
 * image: (3, h, w) in [0, 1]. Returns (h, w) float32 in [0, 1].
 */
torch::Tensor attention_heatmap(network::TripleStreamNet& net, const torch::Tensor& image, Branch branch);

/// Fraction of sum(heatmap^2) inside the half-open pixel box [y0, y1) x [x0, x1).
double energy_inside(const torch::Tensor& heatmap, int64_t y0, int64_t x0, int64_t y1, int64_t x1);

} // namespace freqforge::harness
