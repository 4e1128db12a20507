#include "freqforge/backbone.hpp"

#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

#include "freqforge/errors.hpp"

namespace freqforge::backbone {

namespace nn = torch::nn;

Profile parse_profile(const std::string& name) {
    if (name == "tiny") return Profile::tiny;
    if (name == "full") return Profile::full;
    throw ConfigError("unknown backbone profile '" + name + "' (expected tiny or full)");
}

std::string to_string(Profile profile) { return profile == Profile::tiny ? "tiny" : "full"; }

BackboneConfig BackboneConfig::tiny() { return {}; }

BackboneConfig BackboneConfig::full() {
    BackboneConfig c;
    c.profile = Profile::full;
    c.channels = {64, 128, 256, 728, 728, 1024, 2048};
    return c;
}

void BackboneConfig::validate() const {
    for (auto ch : channels) {
        if (ch <= 0) throw ConfigError("backbone channel counts must be positive");
    }
    if (profile == Profile::tiny && channels != BackboneConfig::tiny().channels) {
        throw ConfigError("tiny profile channels are fixed at (8, 16, 32, 64, 64, 128, 128)");
    }
}

void HierarchicalFeatures::validate() const {
    if (stages.size() != kStages) throw InvalidInput("expected 7 encoder stages");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (!torch::isfinite(stages[i]).all().item<bool>()) {
            throw InvalidInput("non-finite activation in stage " + std::to_string(i));
        }
        if (i > 0 && (stages[i].size(-2) > stages[i - 1].size(-2) || stages[i].size(-1) > stages[i - 1].size(-1))) {
            throw InvalidInput("stage spatial size must be non-increasing");
        }
    }
}

EncoderImpl::EncoderImpl(const BackboneConfig& config, int64_t in_channels) : config_(config) {
    config_.validate();
    int64_t in = in_channels;
    for (int i = 0; i < kStages; ++i) {
        const int64_t out = config_.channels[i];
        const int64_t stride = i <= 4 ? 2 : 1;
        nn::Sequential stage;
        if (config_.profile == Profile::tiny || i == 0) {
            stage->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false)));
        } else {
            stage->push_back(nn::Conv2d(nn::Conv2dOptions(in, in, 3).stride(stride).padding(1).groups(in).bias(false)));
            stage->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 1).bias(false)));
        }
        stage->push_back(nn::BatchNorm2d(out));
        stage->push_back(nn::ReLU());
        stages_.push_back(register_module("stage" + std::to_string(i), stage));
        in = out;
    }
}

HierarchicalFeatures EncoderImpl::forward(const torch::Tensor& image) {
    const auto x0 = image.dim() == 3 ? image.unsqueeze(0) : image;
    if (x0.size(-1) < config_.min_input() || x0.size(-2) < config_.min_input()) {
        throw InvalidInput("encoder input must be at least 32x32");
    }
    HierarchicalFeatures out;
    out.stages.reserve(kStages);
    auto x = x0;
    for (auto& stage : stages_) {
        x = stage->forward(x);
        out.stages.push_back(x);
    }
    return out;
}

double init_bound(const torch::Tensor& weight) {
    const double fan_in = static_cast<double>(weight.numel() / weight.size(0));
    return std::sqrt(6.0 / fan_in);
}

void init_params(torch::nn::Module& module, uint64_t seed) {
    torch::NoGradGuard no_grad;
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (auto& item : module.named_parameters(true)) {
        auto& p = item.value();
        const auto& name = item.key();
        const bool is_weight = name.size() >= 6 && name.compare(name.size() - 6, 6, "weight") == 0;
        if (is_weight && p.dim() >= 2) {
            const double b = init_bound(p);
            p.uniform_(-b, b, gen);
        } else if (is_weight || name.find("scale") != std::string::npos) {
            p.fill_(1.0);
        } else {
            p.zero_();
        }
    }
    for (auto& item : module.named_buffers(true)) {
        const auto& name = item.key();
        if (name.find("running_var") != std::string::npos) item.value().fill_(1.0);
        else item.value().zero_();
    }
}

Encoder make_encoder(const BackboneConfig& config, uint64_t seed, int64_t in_channels) {
    Encoder enc(config, in_channels);
    init_params(*enc, seed);
    return enc;
}

} // namespace freqforge::backbone
