#include "freqforge/network.hpp"

#include "freqforge/cfce.hpp"
#include "freqforge/errors.hpp"
#include "freqforge/freq.hpp"

namespace freqforge::network {

const std::array<Variant, 5>& ablation_variants() {
    static const std::array<Variant, 5> v{Variant::rgb_only, Variant::frequency_only, Variant::triple_sum,
                                          Variant::triple_cfce, Variant::full};
    return v;
}

std::string display_name(Variant v) {
    switch (v) {
    case Variant::rgb_only: return "RGB";
    case Variant::frequency_only: return "Frequency Branch";
    case Variant::triple_sum: return "Triple Branches";
    case Variant::triple_cfce: return "Triple Branches+CFCE";
    case Variant::full: return "Triple Stream Network";
    }
    return "?";
}

std::string key(Variant v) {
    switch (v) {
    case Variant::rgb_only: return "rgb_only";
    case Variant::frequency_only: return "frequency_only";
    case Variant::triple_sum: return "triple_sum";
    case Variant::triple_cfce: return "triple_cfce";
    case Variant::full: return "full";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    for (auto v : ablation_variants()) {
        if (key(v) == name) return v;
    }
    throw ConfigError("unknown model variant '" + name + "'");
}

void NetworkConfig::validate() const {
    if (k < 1 || 2 * k > freq::kBands) throw ConfigError("K must satisfy 1 <= K and 2K <= 64");
    if (alpha < 0 || beta < 0) throw ConfigError("loss weights must be non-negative");
    backbone.validate();
    if (gfm.global_channels >= gfm.gamma_channels) throw ConfigError("C_G must be smaller than C_gamma");
}

TripleStreamNetImpl::TripleStreamNetImpl(const NetworkConfig& config) : config_(config) {
    config_.validate();
    const auto& ch = config_.backbone.channels;
    if (config_.uses_frequency()) {
        attention = register_module("attention", dfcs::RowColumnAttention(config_.attention));
        primary_encoder = register_module("primary_encoder", backbone::Encoder(config_.backbone));
        if (!config_.backbone.share_frequency_weights) {
            secondary_encoder = register_module("secondary_encoder", backbone::Encoder(config_.backbone));
        }
    }
    if (config_.uses_rgb()) rgb_encoder = register_module("rgb_encoder", backbone::Encoder(config_.backbone));

    std::array<int64_t, 7> stage_channels = ch;
    if (config_.uses_cfce()) {
        for (auto& c : stage_channels) c *= 2;
    }
    fusion = register_module("fusion", gfm::GlobalFusion(stage_channels, config_.gfm));
    const int64_t joint_width = config_.uses_aux_losses() ? 2 * ch[6] : 0;
    heads = register_module("heads", gfm::Heads(config_.gfm.gamma_channels, config_.gfm.global_channels, joint_width,
                                                config_.gfm.num_classes));
    if (config_.uses_aux_losses() && config_.weighting == miloss::Weighting::uncertainty) {
        loss_weights = register_module("loss_weights", miloss::UncertaintyWeights());
    }
}

namespace {

std::vector<torch::Tensor> add_stages(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
    std::vector<torch::Tensor> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] + b[i]);
    return out;
}

} // namespace

ForwardOutput TripleStreamNetImpl::forward(const torch::Tensor& images) {
    if (images.dim() != 4) throw InvalidInput("network input must be (n, c, h, w)");
    ForwardOutput out;
    if (config_.uses_frequency()) {
        out.branch_inputs = dfcs::make_branch_inputs(freq::Image(images), attention, config_.k);
        auto& second = secondary_encoder ? secondary_encoder : primary_encoder;
        out.primary = primary_encoder->forward(freq::to_encoder_range(out.branch_inputs->primary));
        out.secondary = second->forward(freq::to_encoder_range(out.branch_inputs->secondary));
    }
    if (config_.uses_rgb()) out.rgb = rgb_encoder->forward(images);

    std::vector<torch::Tensor> stages;
    switch (config_.variant) {
    case Variant::rgb_only: stages = out.rgb.stages; break;
    case Variant::frequency_only: stages = add_stages(out.primary.stages, out.secondary.stages); break;
    case Variant::triple_sum: stages = add_stages(out.rgb.stages, add_stages(out.primary.stages, out.secondary.stages)); break;
    case Variant::triple_cfce:
    case Variant::full:
        out.merged = cfce::enhance_stages(out.primary.stages, out.secondary.stages);
        stages = gfm::pair_stages(out.rgb.stages, out.merged);
        break;
    }
    out.fused = fusion->forward(stages);

    torch::Tensor joint;
    int64_t first = 0;
    if (config_.uses_aux_losses()) {
        auto rgb_top = out.rgb.stages.back().mean({2, 3});
        auto merged_top = out.merged.back().mean({2, 3});
        joint = torch::cat({rgb_top, merged_top}, 1);
        first = rgb_top.size(1);
    }
    out.predictions = gfm::predict(heads, joint, first, out.fused);
    return out;
}

miloss::LossBundle TripleStreamNetImpl::losses(const ForwardOutput& out, const torch::Tensor& labels) {
    namespace F = torch::nn::functional;
    const auto& p = out.predictions;
    auto l_ce = F::cross_entropy(p.logits, labels);
    if (!config_.uses_aux_losses()) {
        auto zero = torch::zeros({}, l_ce.options());
        return miloss::LossBundle{l_ce, zero, zero, l_ce, 1.0, 0.0, 0.0};
    }
    // The joint and gamma heads are classifiers of y in their own right.
    l_ce = l_ce + F::nll_loss(torch::log(p.p_full.clamp_min(1e-12)), labels) +
           F::nll_loss(torch::log(p.p_gamma.clamp_min(1e-12)), labels);
    auto l_d = miloss::decoupling_loss(p.p_full, p.p_left_out);
    auto l_gia = miloss::gia_loss(p.p_gamma, p.p_global);
    if (config_.weighting == miloss::Weighting::uncertainty) {
        return miloss::total_loss_uncertainty(l_ce, l_d, l_gia, loss_weights);
    }
    return miloss::total_loss_fixed(l_ce, l_d, l_gia, config_.alpha, config_.beta);
}

std::vector<std::string> TripleStreamNetImpl::census() const {
    std::vector<std::string> names;
    for (const auto& item : named_children()) names.push_back(item.key());
    return names;
}

TripleStreamNet make_network(const NetworkConfig& config, uint64_t seed) {
    TripleStreamNet net(config);
    backbone::init_params(*net, seed);
    if (net->attention) {
        // A zero output map starts selection from the pooled spectrum alone, with unit band weights.
        torch::NoGradGuard no_grad;
        net->attention->mix_out()->weight.zero_();
    }
    return net;
}

} // namespace freqforge::network
