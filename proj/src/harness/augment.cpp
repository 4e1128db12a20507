#include "freqforge/harness/augment.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "freqforge/errors.hpp"
#include "freqforge/freq.hpp"

namespace freqforge::harness {

namespace F = torch::nn::functional;

Rng make_rng(uint64_t seed, std::initializer_list<uint64_t> keys) {
    std::vector<uint32_t> words{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
    for (auto k : keys) {
        words.push_back(static_cast<uint32_t>(k));
        words.push_back(static_cast<uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

namespace {

torch::Tensor batched(const torch::Tensor& image) {
    if (image.dim() != 3) throw InvalidInput("expected a (c, h, w) image");
    return image.unsqueeze(0);
}

torch::Tensor normal_like(const torch::Tensor& image, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<float> v(static_cast<std::size_t>(image.numel()));
    for (auto& x : v) x = static_cast<float>(n(rng));
    return torch::from_blob(v.data(), image.sizes(), torch::kFloat32).clone().to(image.scalar_type());
}

constexpr std::array<int, 64> kLuminance{16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                                         14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                                         18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                                         49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChrominance{17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                           24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                           99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                           99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

std::array<int, 64> scaled_table(const std::array<int, 64>& base, int quality) {
    if (quality < 1 || quality > 100) throw ConfigError("JPEG quality must lie in [1, 100]");
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    std::array<int, 64> t{};
    for (int i = 0; i < 64; ++i) t[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
    return t;
}

// Level-shifted planes (c, h, w) in 8-bit units through block DCT quantization.
torch::Tensor quantize_planes(const torch::Tensor& planes, const std::array<int, 64>& table) {
    auto q = torch::empty({64}, torch::kFloat64);
    for (int i = 0; i < 64; ++i) q[i] = static_cast<double>(table[i]);
    q = q.view({64, 1, 1});
    auto x = freq::Image(planes);
    auto coeffs = freq::block_dct(freq::pad_to_blocks(x)).coeffs();
    auto quantized = freq::FrequencyTensor(torch::round(coeffs / q) * q);
    return freq::crop(freq::block_idct(quantized), x.height(), x.width()).pixels();
}

} // namespace

torch::Tensor crop_resize(const torch::Tensor& image, double scale, double fx, double fy) {
    const int64_t h = image.size(1), w = image.size(2);
    const int64_t ch = std::max<int64_t>(1, std::lround(h * scale)), cw = std::max<int64_t>(1, std::lround(w * scale));
    const int64_t y0 = std::lround((h - ch) * fy), x0 = std::lround((w - cw) * fx);
    auto crop = image.narrow(1, y0, ch).narrow(2, x0, cw);
    auto out = F::interpolate(batched(crop), F::InterpolateFuncOptions()
                                                 .size(std::vector<int64_t>{h, w})
                                                 .mode(torch::kBilinear)
                                                 .align_corners(false));
    return out.squeeze(0).clamp(0.0, 1.0);
}

torch::Tensor adjust_contrast(const torch::Tensor& image, double factor) {
    auto mean = image.mean();
    return ((image - mean) * factor + mean).clamp(0.0, 1.0);
}

torch::Tensor gaussian_blur(const torch::Tensor& image, double sigma) {
    if (sigma <= 0) return image.clone();
    const int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(2.5 * sigma)));
    auto x = torch::arange(-radius, radius + 1, image.options());
    auto k = torch::exp(-(x * x) / (2 * sigma * sigma));
    k = k / k.sum();
    const int64_t c = image.size(0);
    auto img = F::pad(batched(image), F::PadFuncOptions({radius, radius, radius, radius}).mode(torch::kReflect));
    auto kh = k.view({1, 1, 1, -1}).expand({c, 1, 1, k.size(0)});
    auto kv = k.view({1, 1, -1, 1}).expand({c, 1, k.size(0), 1});
    img = F::conv2d(img, kh, F::Conv2dFuncOptions().groups(c));
    img = F::conv2d(img, kv, F::Conv2dFuncOptions().groups(c));
    return img.squeeze(0).clamp(0.0, 1.0);
}

torch::Tensor rotate(const torch::Tensor& image, double degrees) {
    const double t = degrees * std::numbers::pi / 180.0;
    const double h = static_cast<double>(image.size(1)), w = static_cast<double>(image.size(2));
    // normalized coordinates are anisotropic for non-square images
    auto theta = torch::tensor({{std::cos(t), -std::sin(t) * h / w, 0.0}, {std::sin(t) * w / h, std::cos(t), 0.0}},
                               image.options())
                     .unsqueeze(0);
    auto grid = F::affine_grid(theta, {1, image.size(0), image.size(1), image.size(2)}, false);
    auto out = F::grid_sample(batched(image), grid,
                              F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kReflection).align_corners(false));
    return out.squeeze(0).clamp(0.0, 1.0);
}

torch::Tensor grayscale(const torch::Tensor& image) {
    if (image.size(0) != 3) return image.clone();
    auto y = 0.299 * image[0] + 0.587 * image[1] + 0.114 * image[2];
    return y.unsqueeze(0).expand({3, -1, -1}).clone().clamp(0.0, 1.0);
}

std::array<int, 64> jpeg_quant_table(int quality) { return scaled_table(kLuminance, quality); }

std::array<int, 64> jpeg_chroma_table(int quality) { return scaled_table(kChrominance, quality); }

torch::Tensor compress(const torch::Tensor& image, int quality) {
    namespace F = torch::nn::functional;
    const auto luma_table = jpeg_quant_table(quality);
    const auto x = image.to(torch::kFloat64) * 255.0;
    if (x.size(0) != 3) return ((quantize_planes(x - 128.0, luma_table) + 128.0) / 255.0).clamp(0.0, 1.0).to(image.scalar_type());

    const auto r = x[0], g = x[1], b = x[2];
    auto y = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
    auto cb = -0.168736 * r - 0.331264 * g + 0.5 * b;
    auto cr = 0.5 * r - 0.418688 * g - 0.081312 * b;

    y = quantize_planes(y.unsqueeze(0), luma_table)[0];

    // 4:2:0 chroma: 2x2 averages, quantized with the chroma table, upsampled with a triangle filter.
    const int64_t h = x.size(1), w = x.size(2);
    auto chroma = torch::stack({cb, cr}).unsqueeze(0);
    chroma = F::pad(chroma, F::PadFuncOptions({0, w % 2, 0, h % 2}).mode(torch::kReplicate));
    chroma = F::avg_pool2d(chroma, F::AvgPool2dFuncOptions(2));
    chroma = quantize_planes(chroma[0], jpeg_chroma_table(quality)).unsqueeze(0);
    chroma = F::interpolate(chroma, F::InterpolateFuncOptions()
                                        .size(std::vector<int64_t>{h + h % 2, w + w % 2})
                                        .mode(torch::kBilinear)
                                        .align_corners(false));
    chroma = chroma[0].slice(1, 0, h).slice(2, 0, w);
    cb = chroma[0];
    cr = chroma[1];

    y = y + 128.0;
    auto out = torch::stack({y + 1.402 * cr, y - 0.344136 * cb - 0.714136 * cr, y + 1.772 * cb});
    return (out / 255.0).clamp(0.0, 1.0).to(image.scalar_type());
}

torch::Tensor gaussian_noise(const torch::Tensor& image, double sigma, Rng& rng) {
    return (image + sigma * normal_like(image, rng)).clamp(0.0, 1.0);
}

torch::Tensor iso_noise(const torch::Tensor& image, double gain, double read_sigma, Rng& rng) {
    if (gain <= 0) throw InvalidInput("iso gain must be positive");
    auto src = image.to(torch::kFloat64).contiguous();
    std::vector<double> out(static_cast<std::size_t>(src.numel()));
    const double* p = src.data_ptr<double>();
    std::normal_distribution<double> read(0.0, 1.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double lambda = std::max(p[i], 0.0) / gain;
        std::poisson_distribution<long> shot(lambda > 0 ? lambda : 1e-12);
        out[i] = gain * static_cast<double>(shot(rng)) + read_sigma * read(rng);
    }
    return torch::from_blob(out.data(), image.sizes(), torch::kFloat64).clone().clamp(0.0, 1.0).to(image.scalar_type());
}

bool AugmentPolicy::identity() const noexcept {
    return crop == 0 && contrast == 0 && blur == 0 && rotate == 0 && grayscale == 0 && compress == 0 && gauss == 0 &&
           iso == 0;
}

void AugmentPolicy::validate() const {
    for (double p : {crop, contrast, blur, rotate, grayscale, compress, gauss, iso}) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must lie in [0, 1]");
    }
    if (!(crop_min_scale > 0 && crop_min_scale <= 1)) throw ConfigError("crop_min_scale must lie in (0, 1]");
    if (quality_min < 1 || quality_max > 100 || quality_min > quality_max) throw ConfigError("bad JPEG quality range");
    if (contrast_range < 0 || contrast_range >= 1 || blur_sigma_max < 0 || rotate_degrees < 0 || gauss_sigma_max < 0 ||
        iso_gain_max <= 0 || iso_read_max < 0) {
        throw ConfigError("augmentation ranges must be non-negative (contrast_range < 1, iso_gain_max > 0)");
    }
}

torch::Tensor augment(const torch::Tensor& image, const AugmentPolicy& policy, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Every draw is consumed whether or not the operation fires, so one probability
    // change does not reshuffle the parameters of the others.
    auto x = image;
    const double crop_draw = u(rng), crop_scale = policy.crop_min_scale + (1 - policy.crop_min_scale) * u(rng);
    const double fx = u(rng), fy = u(rng);
    if (crop_draw < policy.crop) x = crop_resize(x, crop_scale, fx, fy);
    const double rot_draw = u(rng), angle = (2 * u(rng) - 1) * policy.rotate_degrees;
    if (rot_draw < policy.rotate) x = rotate(x, angle);
    const double con_draw = u(rng), factor = 1 + (2 * u(rng) - 1) * policy.contrast_range;
    if (con_draw < policy.contrast) x = adjust_contrast(x, factor);
    const double blur_draw = u(rng), sigma = policy.blur_sigma_max * u(rng);
    if (blur_draw < policy.blur) x = gaussian_blur(x, sigma);
    if (u(rng) < policy.grayscale) x = grayscale(x);
    const double jpeg_draw = u(rng);
    const int quality = policy.quality_min + static_cast<int>(u(rng) * (policy.quality_max - policy.quality_min + 1) * 0.999999);
    if (jpeg_draw < policy.compress) x = compress(x, quality);
    const double gauss_draw = u(rng), g_sigma = policy.gauss_sigma_max * u(rng);
    if (gauss_draw < policy.gauss) x = gaussian_noise(x, g_sigma, rng);
    const double iso_draw = u(rng), gain = policy.iso_gain_max * (0.1 + 0.9 * u(rng)), read = policy.iso_read_max * u(rng);
    if (iso_draw < policy.iso) x = iso_noise(x, gain, read, rng);
    return x;
}

std::string Degradation::name() const {
    switch (kind) {
    case Kind::none: return "none";
    case Kind::compression: return "compression";
    case Kind::gaussian: return "gaussian";
    case Kind::iso: return "iso";
    }
    return "?";
}

Degradation::Kind parse_degradation(const std::string& name) {
    if (name == "none") return Degradation::Kind::none;
    if (name == "compression") return Degradation::Kind::compression;
    if (name == "gaussian") return Degradation::Kind::gaussian;
    if (name == "iso") return Degradation::Kind::iso;
    throw ConfigError("unknown degradation '" + name + "' (none, compression, gaussian, iso)");
}

torch::Tensor Degradation::apply(const torch::Tensor& image, Rng& rng) const {
    switch (kind) {
    case Kind::none: return image;
    case Kind::compression: return harness::compress(image, quality);
    case Kind::gaussian: return gaussian_noise(image, sigma, rng);
    case Kind::iso: return iso_noise(image, iso_gain, iso_read, rng);
    }
    return image;
}

} // namespace freqforge::harness
