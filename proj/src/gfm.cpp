#include "freqforge/gfm.hpp"

#include "freqforge/errors.hpp"
#include "freqforge/miloss.hpp"

namespace freqforge::gfm {

namespace nn = torch::nn;

std::vector<torch::Tensor> pair_stages(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
    if (a.size() != b.size()) throw InvalidInput("paired streams must have the same stage count");
    std::vector<torch::Tensor> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(torch::cat({a[i], b[i]}, 1));
    return out;
}

torch::Tensor resample(const torch::Tensor& x, int64_t height, int64_t width) {
    if (x.size(-2) == height && x.size(-1) == width) return x;
    namespace F = nn::functional;
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{height, width})
                                 .mode(torch::kBilinear)
                                 .align_corners(false)
                                 .antialias(true));
}

torch::Tensor multiscale_concat(const std::vector<torch::Tensor>& stages) {
    if (stages.size() < 6) throw InvalidInput("multiscale_concat needs stages x0..x5");
    const int64_t h = stages[5].size(-2), w = stages[5].size(-1);
    std::vector<torch::Tensor> parts;
    parts.reserve(6);
    for (int i = 0; i < 6; ++i) {
        if (!stages[i].defined()) throw InvalidInput("missing stage x" + std::to_string(i));
        parts.push_back(resample(stages[i], h, w));
    }
    return torch::cat(parts, 1);
}

ReduceImpl::ReduceImpl(int64_t in_channels, int64_t out_channels) {
    depthwise_scale = register_parameter("depthwise_scale", torch::ones({in_channels}));
    pointwise = register_parameter("pointwise_weight", torch::zeros({out_channels, in_channels}));
}

torch::Tensor ReduceImpl::forward(const torch::Tensor& x) {
    if (x.size(1) != depthwise_scale.size(0)) throw InvalidInput("reduce: unexpected channel count");
    auto scaled = x * depthwise_scale.view({1, -1, 1, 1});
    return torch::einsum("oc,nchw->nohw", {pointwise, scaled});
}

LinearFuseImpl::LinearFuseImpl(int64_t reduced_channels, int64_t top_channels, int64_t gamma_channels) {
    from_reduced = register_module("from_reduced", nn::Conv2d(nn::Conv2dOptions(reduced_channels, gamma_channels, 1).bias(false)));
    from_top = register_module("from_top", nn::Conv2d(nn::Conv2dOptions(top_channels, gamma_channels, 1).bias(false)));
}

torch::Tensor LinearFuseImpl::forward(const torch::Tensor& reduced, const torch::Tensor& x6) {
    if (reduced.size(1) != from_reduced->options.in_channels() || x6.size(1) != from_top->options.in_channels()) {
        throw InvalidInput("linear_fuse: channel mismatch");
    }
    auto top = resample(x6, reduced.size(-2), reduced.size(-1));
    return from_reduced(reduced) + from_top(top);
}

CompressImpl::CompressImpl(int64_t gamma_channels, int64_t global_channels) {
    reduce = register_module("reduce", nn::Conv2d(nn::Conv2dOptions(gamma_channels, global_channels, 1).bias(false)));
}

torch::Tensor CompressImpl::forward(const torch::Tensor& gamma) { return reduce(gamma).mean({2, 3}); }

GlobalFusionImpl::GlobalFusionImpl(const std::array<int64_t, 7>& stage_channels, const GfmOptions& options)
    : options_(options) {
    if (options_.global_channels >= options_.gamma_channels) {
        throw ConfigError("global feature width C_G must be smaller than C_gamma");
    }
    if (options_.reduced_channels <= 0 || options_.global_channels <= 0) throw ConfigError("fusion widths must be positive");
    int64_t concat = 0;
    for (int i = 0; i < 6; ++i) concat += stage_channels[i];
    reduce = register_module("reduce", Reduce(concat, options_.reduced_channels));
    fuse = register_module("fuse", LinearFuse(options_.reduced_channels, stage_channels[6], options_.gamma_channels));
    compress = register_module("compress", Compress(options_.gamma_channels, options_.global_channels));
}

FusedFeature GlobalFusionImpl::forward(const std::vector<torch::Tensor>& stages) {
    if (stages.size() != 7) throw InvalidInput("global fusion needs stages x0..x6");
    auto reduced = reduce(multiscale_concat(stages));
    FusedFeature out;
    out.gamma = fuse(reduced, stages[6]);
    out.global = compress(out.gamma);
    return out;
}

HeadsImpl::HeadsImpl(int64_t gamma_channels, int64_t global_channels, int64_t joint_width, int64_t num_classes) {
    gamma_head = register_module("gamma_head", nn::Linear(gamma_channels, num_classes));
    g_head = register_module("g_head", nn::Linear(global_channels, num_classes));
    if (joint_width > 0) joint_head = register_module("joint_head", nn::Linear(joint_width, num_classes));
}

Predictions predict(Heads& heads, const torch::Tensor& joint, int64_t joint_first_width, const FusedFeature& fused) {
    Predictions p;
    p.logits = heads->g_head(fused.global);
    p.p_global = torch::softmax(p.logits, 1);
    p.p_gamma = torch::softmax(heads->gamma_head(fused.gamma.mean({2, 3})), 1);
    if (joint.defined() && heads->joint_head) {
        p.p_full = torch::softmax(heads->joint_head(joint), 1);
        p.p_left_out[0] = miloss::leave_one_out_distribution(joint, 1, joint_first_width, heads->joint_head);
        p.p_left_out[1] = miloss::leave_one_out_distribution(joint, 2, joint_first_width, heads->joint_head);
    }
    return p;
}

} // namespace freqforge::gfm
