#include "freqforge/harness/gradcam.hpp"

#include "freqforge/errors.hpp"

namespace freqforge::harness {

std::string to_string(Branch branch) {
    switch (branch) {
    case Branch::rgb: return "rgb";
    case Branch::primary: return "primary";
    case Branch::secondary: return "secondary";
    }
    return "?";
}

Branch parse_branch(const std::string& name) {
    if (name == "rgb") return Branch::rgb;
    if (name == "primary") return Branch::primary;
    if (name == "secondary") return Branch::secondary;
    throw ConfigError("unknown branch '" + name + "' (expected rgb, primary or secondary)");
}

std::vector<Branch> available_branches(const network::NetworkConfig& config) {
    std::vector<Branch> out;
    if (config.uses_rgb()) out.push_back(Branch::rgb);
    if (config.uses_frequency()) {
        out.push_back(Branch::primary);
        out.push_back(Branch::secondary);
    }
    return out;
}

torch::Tensor attention_heatmap(network::TripleStreamNet& net, const torch::Tensor& image, Branch branch) {
    if (image.dim() != 3 || image.size(0) != 3) throw InvalidInput("attention_heatmap expects a (3, h, w) image");
    const auto branches = available_branches(net->config());
    if (std::find(branches.begin(), branches.end(), branch) == branches.end()) {
        throw InvalidInput("the " + network::key(net->config().variant) + " variant has no " + to_string(branch) + " branch");
    }
    const bool was_training = net->is_training();
    net->eval();
    auto out = net->forward(image.unsqueeze(0).to(torch::kFloat32));
    const auto& features = branch == Branch::rgb ? out.rgb : branch == Branch::primary ? out.primary : out.secondary;
    const auto& activation = features.stages.back();
    const auto& logits = out.predictions.logits;
    auto margin = (logits.select(1, 1) - logits.select(1, 0)).sum();
    auto grad = torch::autograd::grad({margin}, {activation}, {}, false, false, true)[0];
    net->train(was_training);

    torch::NoGradGuard no_grad;
    if (!grad.defined()) grad = torch::zeros_like(activation);
    auto weights = grad.mean({2, 3}, true);
    auto cam = torch::relu((weights * activation).sum(1, true));
    cam = torch::nn::functional::interpolate(
        cam, torch::nn::functional::InterpolateFuncOptions()
                 .size(std::vector<int64_t>{image.size(1), image.size(2)})
                 .mode(torch::kBilinear)
                 .align_corners(false));
    cam = cam.squeeze(0).squeeze(0).to(torch::kFloat32);
    const double lo = cam.min().item<double>();
    const double hi = cam.max().item<double>();
    if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) return torch::zeros_like(cam);
    return ((cam - lo) / (hi - lo)).clamp(0, 1);
}

double energy_inside(const torch::Tensor& heatmap, int64_t y0, int64_t x0, int64_t y1, int64_t x1) {
    if (heatmap.dim() != 2) throw InvalidInput("energy_inside expects a (h, w) map");
    const double total = heatmap.to(torch::kFloat64).square().sum().item<double>();
    if (total <= 0) return 0;
    y0 = std::clamp<int64_t>(y0, 0, heatmap.size(0));
    y1 = std::clamp<int64_t>(y1, y0, heatmap.size(0));
    x0 = std::clamp<int64_t>(x0, 0, heatmap.size(1));
    x1 = std::clamp<int64_t>(x1, x0, heatmap.size(1));
    const double inside = heatmap.slice(0, y0, y1).slice(1, x0, x1).to(torch::kFloat64).square().sum().item<double>();
    return inside / total;
}

} // namespace freqforge::harness
