#include "freqforge/freq.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "freqforge/errors.hpp"

namespace freqforge::freq {

namespace {

std::array<int, 64> make_zigzag() {
    std::array<int, 64> order{};
    int k = 0;
    for (int s = 0; s <= 14; ++s) {
        if (s % 2 == 1) {
            for (int u = std::max(0, s - 7); u <= std::min(s, 7); ++u) order[k++] = band_index(u, s - u);
        } else {
            for (int u = std::min(s, 7); u >= std::max(0, s - 7); --u) order[k++] = band_index(u, s - u);
        }
    }
    return order;
}

torch::Tensor as_batched(const torch::Tensor& t, int64_t unbatched_dim) {
    return t.dim() == unbatched_dim ? t.unsqueeze(0) : t;
}

// Broadcasts a 64-vector or (n, 64) matrix onto (n, c, 64, hb, wb).
torch::Tensor band_view(const torch::Tensor& v, int64_t n) {
    if (v.dim() == 1) {
        TORCH_CHECK(v.size(0) == kBands, "band vector must have 64 entries");
        return v.view({1, 1, kBands, 1, 1});
    }
    if (v.dim() == 2 && v.size(1) == kBands && (v.size(0) == n || v.size(0) == 1)) {
        return v.view({v.size(0), 1, kBands, 1, 1});
    }
    throw InvalidInput("band mask/weights must be shaped (64) or (n, 64)");
}

} // namespace

const std::array<int, 64>& zigzag_order() {
    static const std::array<int, 64> order = make_zigzag();
    return order;
}

const std::array<int, 64>& zigzag_rank() {
    static const std::array<int, 64> rank = [] {
        std::array<int, 64> r{};
        const auto& order = zigzag_order();
        for (int i = 0; i < 64; ++i) r[order[i]] = i;
        return r;
    }();
    return rank;
}

torch::Tensor dct_matrix(torch::Dtype dtype) {
    auto d = torch::empty({kBlock, kBlock}, torch::kFloat64);
    auto acc = d.accessor<double, 2>();
    for (int u = 0; u < kBlock; ++u) {
        const double scale = u == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
        for (int x = 0; x < kBlock; ++x) {
            acc[u][x] = scale * std::cos((2.0 * x + 1.0) * u * std::numbers::pi / (2.0 * kBlock));
        }
    }
    return d.to(dtype);
}

Image::Image(torch::Tensor pixels) : pixels_(std::move(pixels)) {
    if (pixels_.dim() != 3 && pixels_.dim() != 4) {
        throw InvalidInput("image must be (c, h, w) or (n, c, h, w)");
    }
    if (!pixels_.is_floating_point()) throw InvalidInput("image pixels must be floating point");
}

FrequencyTensor::FrequencyTensor(torch::Tensor coeffs) : coeffs_(std::move(coeffs)) {
    if ((coeffs_.dim() != 4 && coeffs_.dim() != 5) || coeffs_.size(-3) != kBands) {
        throw InvalidInput("frequency tensor must be (c, 64, hb, wb) or (n, c, 64, hb, wb)");
    }
}

ChannelSet::ChannelSet(std::span<const int> bands) {
    std::array<bool, 64> seen{};
    for (int b : bands) {
        if (b < 0 || b >= kBands) throw InvalidInput("band index out of range: " + std::to_string(b));
        if (seen[b]) throw InvalidInput("duplicate band index: " + std::to_string(b));
        seen[b] = true;
    }
    for (int b : zigzag_order()) {
        if (seen[b]) indices_.push_back(b);
    }
}

ChannelSet::ChannelSet(std::initializer_list<int> bands)
    : ChannelSet(std::span<const int>(bands.begin(), bands.size())) {}

ChannelSet ChannelSet::all() {
    const auto& order = zigzag_order();
    return ChannelSet(std::span<const int>(order.data(), order.size()));
}

bool ChannelSet::contains(int band) const {
    return std::find(indices_.begin(), indices_.end(), band) != indices_.end();
}

torch::Tensor ChannelSet::mask(torch::Dtype dtype) const {
    auto m = torch::zeros({kBands}, torch::kFloat64);
    auto acc = m.accessor<double, 1>();
    for (int b : indices_) acc[b] = 1.0;
    return m.to(dtype);
}

FrequencyTensor block_dct(const Image& image) {
    if (image.height() % kBlock != 0 || image.width() % kBlock != 0) {
        std::ostringstream msg;
        msg << "block_dct needs h and w divisible by 8, got " << image.height() << "x" << image.width()
            << " (pad first)";
        throw InvalidInput(msg.str());
    }
    const auto x = as_batched(image.pixels(), 3);
    const int64_t n = x.size(0), c = x.size(1), hb = x.size(2) / kBlock, wb = x.size(3) / kBlock;
    const auto d = dct_matrix(x.scalar_type()).to(x.device());
    auto blocks = x.reshape({n, c, hb, kBlock, wb, kBlock});
    auto coeffs = torch::einsum("ux,vy,ncixjy->ncuvij", {d, d, blocks}).reshape({n, c, kBands, hb, wb});
    return FrequencyTensor(image.batched() ? coeffs : coeffs.squeeze(0));
}

Image block_idct(const FrequencyTensor& freq) {
    const auto f = as_batched(freq.coeffs(), 4);
    const int64_t n = f.size(0), c = f.size(1), hb = f.size(3), wb = f.size(4);
    const auto d = dct_matrix(f.scalar_type()).to(f.device());
    auto grid = f.reshape({n, c, kBlock, kBlock, hb, wb});
    auto pixels = torch::einsum("ux,vy,ncuvij->ncixjy", {d, d, grid}).reshape({n, c, hb * kBlock, wb * kBlock});
    return Image(freq.batched() ? pixels : pixels.squeeze(0));
}

Image reconstruct_masked(const FrequencyTensor& freq, const torch::Tensor& mask,
                         const std::optional<torch::Tensor>& weights) {
    const auto f = as_batched(freq.coeffs(), 4);
    const int64_t n = f.size(0);
    auto scale = band_view(mask.to(f.scalar_type()), n);
    if (weights) scale = scale * band_view(weights->to(f.scalar_type()), n);
    auto kept = FrequencyTensor(f * scale);
    auto out = block_idct(kept).pixels();
    return Image(freq.batched() ? out : out.squeeze(0));
}

Image reconstruct_from_channels(const FrequencyTensor& freq, const ChannelSet& channels,
                                const std::optional<torch::Tensor>& weights) {
    if (channels.empty()) throw InvalidInput("reconstruction needs at least one band");
    return reconstruct_masked(freq, channels.mask(freq.coeffs().scalar_type()), weights);
}

Image pad_to_blocks(const Image& image) {
    const int64_t ph = (kBlock - image.height() % kBlock) % kBlock;
    const int64_t pw = (kBlock - image.width() % kBlock) % kBlock;
    if (ph == 0 && pw == 0) return image;
    namespace F = torch::nn::functional;
    const auto x = as_batched(image.pixels(), 3);
    const bool reflectable = ph < image.height() && pw < image.width();
    auto mode = reflectable ? F::PadFuncOptions::mode_t(torch::kReflect)
                            : F::PadFuncOptions::mode_t(torch::kReplicate);
    auto padded = F::pad(x, F::PadFuncOptions({0, pw, 0, ph}).mode(mode));
    return Image(image.batched() ? padded : padded.squeeze(0));
}

Image crop(const Image& image, int64_t height, int64_t width) {
    if (height > image.height() || width > image.width()) throw InvalidInput("crop larger than image");
    using torch::indexing::Slice;
    return Image(image.pixels().index({"...", Slice(0, height), Slice(0, width)}));
}

torch::Tensor to_encoder_range(const torch::Tensor& pixels) { return pixels.clamp(-1.0, 1.0); }

std::vector<double> band_energy(const FrequencyTensor& freq) {
    const auto f = as_batched(freq.coeffs(), 4).to(torch::kFloat64);
    auto e = f.square().sum({0, 1, 3, 4}).contiguous();
    return {e.data_ptr<double>(), e.data_ptr<double>() + kBands};
}

} // namespace freqforge::freq
