#include "freqforge/dfcs.hpp"

#include <algorithm>
#include <numeric>

#include "freqforge/errors.hpp"

namespace freqforge::dfcs {

namespace {

torch::Tensor as_rows(const torch::Tensor& pooled) {
    if (pooled.dim() == 1 && pooled.size(0) == freq::kBands) return pooled.unsqueeze(0);
    if (pooled.dim() == 2 && pooled.size(0) == 8 && pooled.size(1) == 8) return pooled.reshape({1, freq::kBands});
    if (pooled.dim() == 2 && pooled.size(1) == freq::kBands) return pooled;
    throw InvalidInput("pooled spectrum must be (64), (8, 8) or (n, 64)");
}

torch::Tensor restore_shape(const torch::Tensor& rows, const torch::Tensor& like) {
    return rows.reshape(like.sizes());
}

void check_k(int k) {
    if (k < 1 || 2 * k > freq::kBands) {
        throw ConfigError("channel count K must satisfy 1 <= K and 2K <= 64, got K=" + std::to_string(k));
    }
}

} // namespace

RowColumnAttentionImpl::RowColumnAttentionImpl(const AttentionOptions& options) : options_(options) {
    if (options_.hidden < 1) throw ConfigError("attention hidden width must be positive");
    if (options_.alpha_rc < 0.0 || options_.alpha_rc > 1.0) throw ConfigError("alpha_rc must lie in [0, 1]");
    mix_in_ = register_module("mix_in", torch::nn::Linear(torch::nn::LinearOptions(freq::kBands, options_.hidden).bias(false)));
    mix_out_ = register_module("mix_out", torch::nn::Linear(torch::nn::LinearOptions(options_.hidden, freq::kBands).bias(false)));
}

torch::Tensor RowColumnAttentionImpl::interaction(const torch::Tensor& pooled) {
    auto rows = as_rows(pooled);
    auto grid = rows.view({-1, 8, 8});
    auto row_sum = grid.sum(2, true); // (n, 8, 1): sum over j
    auto col_sum = grid.sum(1, true); // (n, 1, 8): sum over i
    auto total = grid.sum({1, 2}, true).clamp_min(1e-12);
    return (row_sum * col_sum / total).reshape({-1, freq::kBands});
}

torch::Tensor RowColumnAttentionImpl::forward(const torch::Tensor& pooled) {
    auto h = mix_in_(interaction(pooled));
    if (!options_.linear_activation) h = torch::relu(h);
    return restore_shape(mix_out_(h), pooled);
}

torch::Tensor ChannelImportance::map8x8() const {
    return torch::tensor(scores, torch::kFloat64).view({8, 8});
}

torch::Tensor pooled_spectrum(const freq::FrequencyTensor& freq) {
    const auto& c = freq.coeffs();
    return freq.batched() ? c.abs().mean({1, 3, 4}) : c.abs().mean({0, 2, 3});
}

torch::Tensor row_column_attention(const torch::Tensor& pooled, RowColumnAttention& attention) {
    return attention->forward(pooled);
}

torch::Tensor fused_scores(const freq::FrequencyTensor& freq, RowColumnAttention& attention) {
    auto pooled = pooled_spectrum(freq);
    const double alpha = attention->options().alpha_rc;
    if (alpha == 0.0) return pooled;
    return pooled + alpha * attention->forward(pooled);
}

std::pair<freq::ChannelSet, freq::ChannelSet> select_channels(std::span<const double> scores, int k) {
    check_k(k);
    if (scores.size() != static_cast<std::size_t>(freq::kBands)) throw InvalidInput("scores must have 64 entries");
    const auto& rank = freq::zigzag_rank();
    std::array<int, 64> order{};
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return rank[a] < rank[b];
    });
    std::span<const int> ranked(order);
    return {freq::ChannelSet(ranked.subspan(0, k)), freq::ChannelSet(ranked.subspan(k, k))};
}

ChannelImportance fused_attention(const freq::FrequencyTensor& freq, RowColumnAttention& attention, int k) {
    check_k(k);
    if (freq.batched()) throw InvalidInput("fused_attention takes a single image; use make_branch_inputs for batches");
    torch::NoGradGuard no_grad;
    auto s = fused_scores(freq, attention).to(torch::kFloat64).contiguous();
    ChannelImportance out;
    out.scores.assign(s.data_ptr<double>(), s.data_ptr<double>() + freq::kBands);
    std::tie(out.primary, out.secondary) = select_channels(out.scores, k);
    return out;
}

BranchInputs branch_inputs_from_scores(const freq::Image& image, const freq::FrequencyTensor& freq,
                                       const torch::Tensor& scores, int k) {
    check_k(k);
    auto rows = scores.dim() == 1 ? scores.unsqueeze(0) : scores;
    const int64_t n = rows.size(0);
    auto host = rows.detach().to(torch::kFloat64).contiguous();
    auto primary_mask = torch::zeros({n, freq::kBands}, torch::kFloat64);
    auto secondary_mask = torch::zeros({n, freq::kBands}, torch::kFloat64);
    auto pm = primary_mask.accessor<double, 2>();
    auto sm = secondary_mask.accessor<double, 2>();

    BranchInputs out;
    out.importance.reserve(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const double* p = host.data_ptr<double>() + i * freq::kBands;
        ChannelImportance imp;
        imp.scores.assign(p, p + freq::kBands);
        std::tie(imp.primary, imp.secondary) = select_channels(imp.scores, k);
        for (int b : imp.primary.indices()) pm[i][b] = 1.0;
        for (int b : imp.secondary.indices()) sm[i][b] = 1.0;
        out.importance.push_back(std::move(imp));
    }

    const auto dtype = freq.coeffs().scalar_type();
    auto pooled = pooled_spectrum(freq).detach();
    auto weights = rows / (pooled.dim() == 1 ? pooled.unsqueeze(0) : pooled).clamp_min(kPooledFloor);
    out.primary_mask = primary_mask.to(dtype);
    out.secondary_mask = secondary_mask.to(dtype);
    out.rgb = image.pixels();
    out.primary = freq::reconstruct_masked(freq, out.primary_mask, weights).pixels();
    out.secondary = freq::reconstruct_masked(freq, out.secondary_mask, weights).pixels();
    out.scores = rows;
    return out;
}

BranchInputs make_branch_inputs(const freq::Image& image, RowColumnAttention& attention, int k) {
    check_k(k);
    const auto padded = freq::pad_to_blocks(image);
    const auto freq = freq::block_dct(padded);
    auto out = branch_inputs_from_scores(padded, freq, fused_scores(freq, attention), k);
    out.rgb = image.pixels();
    out.primary = freq::crop(freq::Image(out.primary), image.height(), image.width()).pixels();
    out.secondary = freq::crop(freq::Image(out.secondary), image.height(), image.width()).pixels();
    return out;
}

} // namespace freqforge::dfcs
