#include "doctest.h"

#include <map>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "freqforge/errors.hpp"
#include "freqforge/freq.hpp"
#include "freqforge/harness/augment.hpp"
#include "freqforge/harness/dataset.hpp"
#include "freqforge/harness/image_io.hpp"
#include "test_util.hpp"

using namespace freqforge;
using namespace freqforge::harness;
using freqforge::testing::max_abs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("freqforge_test_data_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

torch::Tensor eight_bit_image(int64_t c, int64_t h, int64_t w, uint64_t seed) {
    return quantize_8bit(freqforge::testing::random_image({c, h, w}, seed, torch::kFloat32));
}

GeneratorConfig small_config(uint64_t seed = 3) {
    GeneratorConfig c;
    c.seed = seed;
    c.n_per_class = 20;
    return c;
}

} // namespace

TEST_CASE("image files round trip exactly for 8-bit content") {
    const auto dir = scratch("io");
    const auto color = eight_bit_image(3, 24, 40, 1);
    const auto gray = eight_bit_image(1, 16, 8, 2);
    write_image(dir / "a" / "color.ppm", color);
    write_image(dir / "gray.pgm", gray);
    CHECK(max_abs(read_image(dir / "a" / "color.ppm") - color) == 0.0);
    CHECK(max_abs(read_image(dir / "gray.pgm") - gray) == 0.0);
    CHECK(slurp(dir / "gray.pgm").starts_with("P5"));

    // Out-of-range values are clamped on write.
    write_image(dir / "clamp.pgm", torch::full({1, 2, 2}, 2.0));
    CHECK(read_image(dir / "clamp.pgm").min().item<double>() == 1.0);
    CHECK_THROWS_AS(read_image(dir / "missing.ppm"), InvalidInput);
    std::ofstream(dir / "bad.ppm") << "P3\n1 1\n255\n0 0 0\n";
    CHECK_THROWS_AS(read_image(dir / "bad.ppm"), InvalidInput);
}

TEST_CASE("identity augmentation returns the input") {
    const auto img = eight_bit_image(3, 64, 64, 4);
    AugmentPolicy policy;
    CHECK(policy.identity());
    auto rng = make_rng(5, {1});
    CHECK(torch::equal(augment(img, policy, rng), img));
}

TEST_CASE("grayscale of a gray image is unchanged") {
    const auto gray = eight_bit_image(1, 32, 32, 6).expand({3, 32, 32}).contiguous();
    CHECK(max_abs(grayscale(gray) - gray) < 1e-6);
}

TEST_CASE("augmentation is deterministic given the rng state") {
    const auto img = eight_bit_image(3, 64, 64, 7);
    AugmentPolicy p;
    p.crop = p.contrast = p.blur = p.rotate = p.grayscale = p.compress = p.gauss = p.iso = 0.5;
    for (uint64_t k = 0; k < 6; ++k) {
        auto r1 = make_rng(11, {k});
        auto r2 = make_rng(11, {k});
        const auto a = augment(img, p, r1);
        const auto b = augment(img, p, r2);
        CHECK(torch::equal(a, b));
        CHECK(a.min().item<double>() >= 0.0);
        CHECK(a.max().item<double>() <= 1.0);
        CHECK(a.sizes() == img.sizes());
    }
    auto r1 = make_rng(11, {0});
    auto r2 = make_rng(12, {0});
    CHECK_FALSE(torch::equal(augment(img, p, r1), augment(img, p, r2)));
}

TEST_CASE("rng streams depend on keys, not on creation order") {
    auto a = make_rng(1, {2, 3});
    auto b = make_rng(1, {3, 2});
    auto c = make_rng(1, {2, 3});
    const auto first = a();
    CHECK(first != b());
    CHECK(first == c());
}

TEST_CASE("perturbations behave at their neutral settings") {
    const auto img = eight_bit_image(3, 32, 32, 8);
    CHECK(max_abs(adjust_contrast(img, 1.0) - img) < 1e-6);
    CHECK(max_abs(gaussian_blur(img, 0.0) - img) < 1e-6);
    CHECK(max_abs(rotate(img, 0.0) - img) < 1e-5);
    CHECK(max_abs(crop_resize(img, 1.0, 0.5, 0.5) - img) < 1e-5);
    auto rng = make_rng(0, {0});
    CHECK(max_abs(gaussian_noise(img, 0.0, rng) - img) == 0.0);
    // Blur of a constant image stays constant.
    const auto flat = torch::full({3, 16, 16}, 0.4);
    CHECK(max_abs(gaussian_blur(flat, 1.0) - flat) < 1e-6);
}

TEST_CASE("JPEG quantization table follows the IJG scaling") {
    // Quality 50 is the base luminance table.
    const auto q50 = jpeg_quant_table(50);
    CHECK(q50[0] == 16);
    CHECK(q50[63] == 99);
    // Quality 100 quantizes every coefficient with step 1.
    for (int v : jpeg_quant_table(100)) CHECK(v == 1);
    // Quality 75: scale 50, (16*50+50)/100 = 8.
    CHECK(jpeg_quant_table(75)[0] == 8);
    CHECK_THROWS_AS(jpeg_quant_table(0), ConfigError);

    const auto img = eight_bit_image(3, 40, 40, 9);
    const auto light = compress(img, 95), heavy = compress(img, 10);
    CHECK(light.sizes() == img.sizes());
    CHECK(max_abs(light - img) < max_abs(heavy - img));
    // A constant image keeps its DC exactly on the quantization grid of step 16 at quality 50.
    const auto flat = torch::full({3, 16, 16}, 128.0 / 255.0);
    CHECK(max_abs(compress(flat, 50) - flat) < 1e-6);
}

TEST_CASE("ISO noise variance grows with the signal") {
    auto rng = make_rng(3, {0});
    const auto dark = torch::full({1, 64, 64}, 0.1), bright = torch::full({1, 64, 64}, 0.8);
    const double v_dark = (iso_noise(dark, 0.02, 0.0, rng) - dark).var().item<double>();
    const double v_bright = (iso_noise(bright, 0.02, 0.0, rng) - bright).var().item<double>();
    CHECK(v_bright > 3 * v_dark);
}

TEST_CASE("policies and degradations validate their parameters") {
    AugmentPolicy p;
    p.blur = 1.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    CHECK(parse_degradation("compression") == Degradation::Kind::compression);
    CHECK(parse_degradation("none") == Degradation::Kind::none);
    CHECK_THROWS_AS(parse_degradation("fog"), ConfigError);
    Degradation none;
    auto rng = make_rng(0, {0});
    const auto img = eight_bit_image(3, 16, 16, 1);
    CHECK(torch::equal(none.apply(img, rng), img));
}

TEST_CASE("synthetic generation is byte-reproducible") {
    const auto d1 = scratch("gen1"), d2 = scratch("gen2");
    const auto config = small_config(7);
    const auto m1 = generate_synthetic_dataset(d1, config);
    generate_synthetic_dataset(d2, config);
    CHECK(m1.records.size() == 40);
    CHECK(slurp(d1 / kManifestName) == slurp(d2 / kManifestName));
    CHECK(slurp(d1 / kDatasetInfoName) == slurp(d2 / kDatasetInfoName));
    for (const auto& r : m1.records) CHECK(slurp(d1 / r.path) == slurp(d2 / r.path));

    std::size_t lines = 0;
    std::ifstream in(d1 / kManifestName);
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == 2 * static_cast<std::size_t>(config.n_per_class));

    const auto m = read_manifest(d1);
    CHECK(m.records.size() == 40);
    CHECK(m.count(Split::train) == 24);
    CHECK(m.count(Split::val) == 8);
    CHECK(m.count(Split::test) == 8);
    REQUIRE(m.seed.has_value());
    CHECK(*m.seed == 7);

    // Loaded pixels equal the in-memory synthesis.
    const auto disk = load_split(m, Split::val);
    const auto mem = synthesize_split(config, Split::val);
    CHECK(torch::equal(disk.images, mem.images));
    CHECK(torch::equal(disk.labels, mem.labels));

    const auto other = synthesize_split(small_config(8), Split::val);
    CHECK_FALSE(torch::equal(other.images, mem.images));
}

TEST_CASE("manifest reader rejects malformed records") {
    const auto dir = scratch("manifest");
    write_image(dir / "a.ppm", eight_bit_image(3, 8, 8, 0));
    auto write = [&](const std::string& text) { std::ofstream(dir / kManifestName, std::ios::trunc) << text; };
    write("a.ppm\t0\ttrain\n");
    CHECK(read_manifest(dir).records.size() == 1);
    write("a.ppm\t2\ttrain\n");
    CHECK_THROWS_AS(read_manifest(dir), InvalidInput);
    write("a.ppm\t0\tholdout\n");
    CHECK_THROWS_AS(read_manifest(dir), InvalidInput);
    write("a.ppm\t0\n");
    CHECK_THROWS_AS(read_manifest(dir), InvalidInput);
    write("b.ppm\t0\ttrain\n");
    CHECK_THROWS_AS(read_manifest(dir), InvalidInput);
    write("a.ppm\t0\ttrain\na.ppm\t1\ttest\n");
    CHECK_THROWS_AS(read_manifest(dir), InvalidInput);
    CHECK_THROWS_AS(read_manifest(dir / "nope"), InvalidInput);
}

TEST_CASE("fakes carry extra energy in their artifact bands") {
    auto config = small_config(1);
    config.n_per_class = 60;
    // Class means of the energy share of every pool band, from the freq module.
    auto mean_share = [&](int label) {
        std::map<int, double> share;
        for (int i = 0; i < config.n_per_class; ++i) {
            const auto s = synthesize(config, label, i);
            const auto e = freq::band_energy(freq::block_dct(freq::Image(s.image.to(torch::kFloat64))));
            double total = 0;
            for (double v : e) total += v;
            for (int b : config.artifact.band_pool) share[b] += e[b] / total / config.n_per_class;
        }
        return share;
    };
    const auto real = mean_share(0), fake = mean_share(1);
    for (int b : config.artifact.band_pool) {
        INFO("band " << b);
        CHECK(fake.at(b) > 1.5 * real.at(b));
    }
    // Bands outside the pool are not systematically changed.
    const auto s = synthesize(config, 1, 0);
    REQUIRE(s.artifact.has_value());
    CHECK(s.artifact->bands.size() == static_cast<std::size_t>(config.artifact.bands_per_image));
    CHECK(s.artifact->bottom > s.artifact->top);
    CHECK_FALSE(synthesize(config, 0, 0).artifact.has_value());
}

TEST_CASE("an empty band pool makes the classes indistinguishable in distribution") {
    auto config = small_config(2);
    config.artifact.band_pool.clear();
    const auto s = synthesize(config, 1, 5);
    const bool marked = s.artifact.has_value() && !s.artifact->bands.empty();
    CHECK_FALSE(marked);
}

TEST_CASE("generator configuration is validated") {
    auto c = small_config();
    c.n_per_class = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.image_size = 60;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.artifact.band_pool = {3, 3};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.artifact.region_max_blocks = 9;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
