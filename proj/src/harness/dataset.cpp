#include "freqforge/harness/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "freqforge/errors.hpp"
#include "freqforge/freq.hpp"
#include "freqforge/harness/augment.hpp"
#include "freqforge/harness/image_io.hpp"

namespace freqforge::harness {

namespace fs = std::filesystem;

std::string to_string(Split split) {
    switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw InvalidInput("unknown split '" + name + "' (train, val, test)");
}

void ArtifactSpec::validate(int64_t image_size) const {
    std::set<int> seen;
    for (int b : band_pool) {
        if (b < 0 || b >= 64) throw ConfigError("artifact band out of range [0, 63]");
        if (!seen.insert(b).second) throw ConfigError("duplicate artifact band");
    }
    if (!band_pool.empty() && (bands_per_image < 1 || bands_per_image > static_cast<int>(band_pool.size()))) {
        throw ConfigError("bands_per_image must lie in [1, |band_pool|]");
    }
    if (amplitude < 0 || amplitude_jitter < 0 || amplitude_jitter >= 1) throw ConfigError("bad artifact amplitude");
    const int64_t blocks = image_size / freq::kBlock;
    if (region_min_blocks < 1 || region_min_blocks > region_max_blocks || region_max_blocks > blocks) {
        throw ConfigError("artifact region must fit the block grid");
    }
}

void GeneratorConfig::validate() const {
    if (n_per_class < 10) throw ConfigError("n_per_class must be at least 10");
    if (image_size < 32 || image_size % freq::kBlock != 0) throw ConfigError("image_size must be a multiple of 8, >= 32");
    if (train_fraction <= 0 || val_fraction <= 0 || train_fraction + val_fraction >= 1) {
        throw ConfigError("train/val fractions must be positive and leave room for test");
    }
    if (grain_min < 0 || grain_max < grain_min) throw ConfigError("bad grain range");
    if (texture < 0 || texture_waves < 0) throw ConfigError("bad texture settings");
    artifact.validate(image_size);
}

Split split_of(const GeneratorConfig& config, int index) {
    const int n_train = static_cast<int>(std::lround(config.n_per_class * config.train_fraction));
    const int n_val = static_cast<int>(std::lround(config.n_per_class * config.val_fraction));
    if (index < n_train) return Split::train;
    if (index < n_train + n_val) return Split::val;
    return Split::test;
}

namespace {

double smoothstep_edge(double signed_distance, double width) { return 1.0 / (1.0 + std::exp(signed_distance / width)); }

torch::Tensor base_content(const GeneratorConfig& c, Rng& rng) {
    const int64_t n = c.image_size;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto img = torch::zeros({3, n, n}, torch::kFloat64);
    auto a = img.accessor<double, 3>();

    std::array<double, 3> base{};
    for (auto& b : base) b = 0.25 + 0.5 * u(rng);

    // smooth texture: a few low-frequency plane waves with per-channel gains
    struct Wave {
        double fx, fy, phase, amp;
        std::array<double, 3> gain;
    };
    std::vector<Wave> waves(3);
    for (auto& w : waves) {
        w.fx = (2 * u(rng) - 1) * 2.0 * 2 * std::numbers::pi / static_cast<double>(n);
        w.fy = (2 * u(rng) - 1) * 2.0 * 2 * std::numbers::pi / static_cast<double>(n);
        w.phase = 2 * std::numbers::pi * u(rng);
        w.amp = 0.04 + 0.06 * u(rng);
        for (auto& g : w.gain) g = 0.5 + 0.5 * u(rng);
    }

    // texture: plane waves between 1/24 and 1/3 cycles per pixel, amplitude falling like 1/f
    for (int i = 0; i < c.texture_waves; ++i) {
        const double f = std::exp(std::log(1.0 / 24) + (std::log(1.0 / 3) - std::log(1.0 / 24)) * u(rng));
        const double theta = 2 * std::numbers::pi * u(rng);
        Wave w;
        w.fx = 2 * std::numbers::pi * f * std::cos(theta);
        w.fy = 2 * std::numbers::pi * f * std::sin(theta);
        w.phase = 2 * std::numbers::pi * u(rng);
        w.amp = c.texture * (0.5 + u(rng)) / (24.0 * f);
        for (auto& g : w.gain) g = 0.5 + 0.5 * u(rng);
        waves.push_back(w);
    }

    // soft shapes: discs and axis-aligned boxes
    struct Shape {
        bool disc;
        double cx, cy, rx, ry;
        std::array<double, 3> delta;
    };
    std::vector<Shape> shapes(1 + static_cast<int>(u(rng) * 3));
    for (auto& s : shapes) {
        s.disc = u(rng) < 0.5;
        s.cx = n * (0.15 + 0.7 * u(rng));
        s.cy = n * (0.15 + 0.7 * u(rng));
        s.rx = n * (0.08 + 0.17 * u(rng));
        s.ry = n * (0.08 + 0.17 * u(rng));
        for (auto& d : s.delta) d = 0.4 * u(rng) - 0.2;
    }

    const double grain = c.grain_min + (c.grain_max - c.grain_min) * u(rng);
    for (int64_t y = 0; y < n; ++y) {
        for (int64_t x = 0; x < n; ++x) {
            std::array<double, 3> v = base;
            for (const auto& w : waves) {
                const double s = w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
                for (int ch = 0; ch < 3; ++ch) v[ch] += w.gain[ch] * s;
            }
            for (const auto& s : shapes) {
                double d;
                if (s.disc) {
                    const double dx = (x - s.cx) / s.rx, dy = (y - s.cy) / s.ry;
                    d = (std::sqrt(dx * dx + dy * dy) - 1.0) * std::min(s.rx, s.ry);
                } else {
                    d = std::max(std::abs(x - s.cx) - s.rx, std::abs(y - s.cy) - s.ry);
                }
                const double m = smoothstep_edge(d, 1.5);
                for (int ch = 0; ch < 3; ++ch) v[ch] += m * s.delta[ch];
            }
            for (int ch = 0; ch < 3; ++ch) a[ch][y][x] = v[ch] + grain * normal(rng);
        }
    }
    return img;
}

ArtifactBox inject(torch::Tensor& img, const GeneratorConfig& c, Rng& rng) {
    const auto& spec = c.artifact;
    ArtifactBox box;
    if (spec.band_pool.empty()) return box;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int64_t blocks = c.image_size / freq::kBlock;
    std::uniform_int_distribution<int> side(spec.region_min_blocks, spec.region_max_blocks);
    const int bh = side(rng), bw = side(rng);
    const int top = std::uniform_int_distribution<int>(0, static_cast<int>(blocks) - bh)(rng);
    const int left = std::uniform_int_distribution<int>(0, static_cast<int>(blocks) - bw)(rng);

    auto pool = spec.band_pool;
    std::shuffle(pool.begin(), pool.end(), rng);
    box.bands.assign(pool.begin(), pool.begin() + spec.bands_per_image);
    std::sort(box.bands.begin(), box.bands.end());
    box.top = top * freq::kBlock;
    box.left = left * freq::kBlock;
    box.bottom = (top + bh) * freq::kBlock;
    box.right = (left + bw) * freq::kBlock;

    auto coeffs = freq::block_dct(freq::Image(img)).coeffs().clone();
    auto acc = coeffs.accessor<double, 4>();
    for (int b : box.bands) {
        for (int i = top; i < top + bh; ++i)
            for (int j = left; j < left + bw; ++j)
                for (int ch = 0; ch < 3; ++ch) {
                    const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
                    const double mag = spec.amplitude * (1 + spec.amplitude_jitter * (2 * u(rng) - 1));
                    acc[ch][b][i][j] += sign * mag;
                }
    }
    img = freq::block_idct(freq::FrequencyTensor(coeffs)).pixels();
    return box;
}

nlohmann::json to_json(const GeneratorConfig& c) {
    return {{"seed", c.seed},
            {"n_per_class", c.n_per_class},
            {"image_size", c.image_size},
            {"train_fraction", c.train_fraction},
            {"val_fraction", c.val_fraction},
            {"grain_min", c.grain_min},
            {"grain_max", c.grain_max},
            {"texture", c.texture},
            {"texture_waves", c.texture_waves},
            {"artifact",
             {{"band_pool", c.artifact.band_pool},
              {"bands_per_image", c.artifact.bands_per_image},
              {"amplitude", c.artifact.amplitude},
              {"amplitude_jitter", c.artifact.amplitude_jitter},
              {"region_min_blocks", c.artifact.region_min_blocks},
              {"region_max_blocks", c.artifact.region_max_blocks}}}};
}

std::string sample_name(int label, int index) {
    std::ostringstream s;
    s << (label ? "fake_" : "real_");
    s.width(5);
    s.fill('0');
    s << index << ".ppm";
    return s.str();
}

} // namespace

Sample synthesize(const GeneratorConfig& config, int label, int index) {
    auto rng = make_rng(config.seed, {static_cast<uint64_t>(label), static_cast<uint64_t>(index)});
    Sample s;
    s.label = label;
    auto img = base_content(config, rng);
    if (label == 1) s.artifact = inject(img, config, rng);
    s.image = quantize_8bit(img.to(torch::kFloat32));
    return s;
}

std::size_t DatasetManifest::count(Split split) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [&](const ManifestRecord& r) { return r.split == split; }));
}

void write_manifest(const fs::path& file, const DatasetManifest& manifest) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest " + file.string());
    for (const auto& r : manifest.records) out << r.path << '\t' << r.label << '\t' << to_string(r.split) << '\n';
}

DatasetManifest read_manifest(const fs::path& file_or_dir) {
    const fs::path file = fs::is_directory(file_or_dir) ? file_or_dir / kManifestName : file_or_dir;
    std::ifstream in(file);
    if (!in) throw InvalidInput("cannot open manifest " + file.string());
    DatasetManifest m;
    m.root = file.parent_path();
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> paths;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string path, label, split;
        if (!std::getline(fields, path, '\t') || !std::getline(fields, label, '\t') || !std::getline(fields, split, '\t')) {
            throw InvalidInput(file.string() + ":" + std::to_string(lineno) + ": expected path<TAB>label<TAB>split");
        }
        if (label != "0" && label != "1") throw InvalidInput(file.string() + ":" + std::to_string(lineno) + ": label must be 0 or 1");
        ManifestRecord r{path, label == "1" ? 1 : 0, parse_split(split)};
        if (!paths.insert(path).second) throw InvalidInput("image listed twice in manifest: " + path);
        if (!fs::exists(m.root / r.path)) throw InvalidInput("manifest image missing: " + (m.root / r.path).string());
        m.records.push_back(std::move(r));
    }
    const fs::path info = m.root / kDatasetInfoName;
    if (fs::exists(info)) {
        std::ifstream j(info);
        auto doc = nlohmann::json::parse(j, nullptr, false);
        if (!doc.is_discarded() && doc.contains("generator")) m.seed = doc["generator"].value("seed", uint64_t{0});
    }
    return m;
}

DatasetManifest generate_synthetic_dataset(const fs::path& out_dir, const GeneratorConfig& config) {
    config.validate();
    fs::create_directories(out_dir);
    DatasetManifest m;
    m.root = out_dir;
    m.seed = config.seed;
    nlohmann::json boxes = nlohmann::json::array();
    for (int label : {0, 1}) {
        for (int i = 0; i < config.n_per_class; ++i) {
            const auto split = split_of(config, i);
            const std::string rel = "images/" + to_string(split) + "/" + sample_name(label, i);
            const auto s = synthesize(config, label, i);
            write_image(out_dir / rel, s.image);
            m.records.push_back({rel, label, split});
            if (s.artifact) {
                boxes.push_back({{"path", rel},
                                 {"box", {s.artifact->top, s.artifact->left, s.artifact->bottom, s.artifact->right}},
                                 {"bands", s.artifact->bands}});
            }
        }
    }
    write_manifest(out_dir / kManifestName, m);
    std::ofstream info(out_dir / kDatasetInfoName, std::ios::binary);
    info << nlohmann::json{{"generator", to_json(config)}, {"artifacts", boxes}}.dump(1) << '\n';
    return m;
}

LabeledImages load_split(const DatasetManifest& manifest, Split split) {
    LabeledImages out;
    std::vector<torch::Tensor> images;
    std::vector<int64_t> labels;
    for (const auto& r : manifest.records) {
        if (r.split != split) continue;
        auto img = read_image(manifest.root / r.path);
        if (img.size(0) == 1) img = img.expand({3, -1, -1}).clone();
        if (!images.empty() && img.sizes() != images.front().sizes()) {
            throw InvalidInput("all images of a split must share one size: " + r.path);
        }
        images.push_back(img);
        labels.push_back(r.label);
        out.paths.push_back(r.path);
    }
    if (images.empty()) {
        out.images = torch::zeros({0, 3, 0, 0});
        out.labels = torch::zeros({0}, torch::kLong);
        return out;
    }
    out.images = torch::stack(images);
    out.labels = torch::tensor(labels, torch::kLong);
    return out;
}

LabeledImages synthesize_split(const GeneratorConfig& config, Split split) {
    config.validate();
    LabeledImages out;
    std::vector<torch::Tensor> images;
    std::vector<int64_t> labels;
    for (int label : {0, 1}) {
        for (int i = 0; i < config.n_per_class; ++i) {
            if (split_of(config, i) != split) continue;
            images.push_back(synthesize(config, label, i).image);
            labels.push_back(label);
            out.paths.push_back("images/" + to_string(split) + "/" + sample_name(label, i));
        }
    }
    out.images = torch::stack(images);
    out.labels = torch::tensor(labels, torch::kLong);
    return out;
}

} // namespace freqforge::harness
