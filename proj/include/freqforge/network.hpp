#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "freqforge/backbone.hpp"
#include "freqforge/dfcs.hpp"
#include "freqforge/gfm.hpp"
#include "freqforge/miloss.hpp"

namespace freqforge::network {

/// Model variants of the component ablation, weakest first.
enum class Variant { rgb_only, frequency_only, triple_sum, triple_cfce, full };

const std::array<Variant, 5>& ablation_variants();
/// Table label, e.g. "Triple Branches+CFCE".
std::string display_name(Variant v);
/// Config key, e.g. "triple_cfce".
std::string key(Variant v);
Variant parse_variant(const std::string& key);

struct NetworkConfig {
    Variant variant = Variant::full;
    int k = dfcs::kDefaultK;
    dfcs::AttentionOptions attention;
    backbone::BackboneConfig backbone;
    gfm::GfmOptions gfm;
    miloss::Weighting weighting = miloss::Weighting::uncertainty;
    double alpha = 1.0; // fixed-mode weight of L_D
    double beta = 1.0;  // fixed-mode weight of L_GIA

    bool uses_rgb() const noexcept { return variant != Variant::frequency_only; }
    bool uses_frequency() const noexcept { return variant != Variant::rgb_only; }
    bool uses_cfce() const noexcept { return variant == Variant::triple_cfce || variant == Variant::full; }
    bool uses_aux_losses() const noexcept { return variant == Variant::full; }
    void validate() const;
};

struct ForwardOutput {
    gfm::Predictions predictions;
    gfm::FusedFeature fused;
    std::optional<dfcs::BranchInputs> branch_inputs;
    backbone::HierarchicalFeatures rgb;
    backbone::HierarchicalFeatures primary;
    backbone::HierarchicalFeatures secondary;
    std::vector<torch::Tensor> merged; // CFCE output per stage, when used
};

/**
 * RGB / primary-frequency / secondary-frequency network.
 *
 * Submodules are only constructed when the variant needs them, so a parameter
 * census tells the variants apart.
 */
class TripleStreamNetImpl : public torch::nn::Module {
public:
    explicit TripleStreamNetImpl(const NetworkConfig& config);

    /// images: (n, 3, h, w) in [0, 1].
    ForwardOutput forward(const torch::Tensor& images);

    /// Loss bundle for one forward pass; labels are int64 class ids.
    miloss::LossBundle losses(const ForwardOutput& out, const torch::Tensor& labels);

    const NetworkConfig& config() const noexcept { return config_; }
    /// Names of the directly registered submodules.
    std::vector<std::string> census() const;

    dfcs::RowColumnAttention attention{nullptr};
    backbone::Encoder rgb_encoder{nullptr};
    backbone::Encoder primary_encoder{nullptr};
    backbone::Encoder secondary_encoder{nullptr}; // absent when weights are shared
    gfm::GlobalFusion fusion{nullptr};
    gfm::Heads heads{nullptr};
    miloss::UncertaintyWeights loss_weights{nullptr};

private:
    NetworkConfig config_;
};
TORCH_MODULE(TripleStreamNet);

/// Builds and seeds a network.
TripleStreamNet make_network(const NetworkConfig& config, uint64_t seed);

} // namespace freqforge::network
