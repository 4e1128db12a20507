#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace freqforge::harness {

enum class Split { train, val, test };
std::string to_string(Split split);
Split parse_split(const std::string& name);

/// Band-limited DCT energy injected into fake images.
struct ArtifactSpec {
    std::vector<int> band_pool{45, 38, 52, 46, 53, 31, 59, 54}; // candidate bands; empty = no artifact
    int bands_per_image = 3;
    double amplitude = 0.3;     // coefficient magnitude on [0, 1] pixels
    double amplitude_jitter = 0.3; // relative, uniform in [1 - j, 1 + j]
    int region_min_blocks = 3;   // region side in 8x8 blocks
    int region_max_blocks = 6;

    void validate(int64_t image_size) const;
};

struct GeneratorConfig {
    uint64_t seed = 0;
    int n_per_class = 1000;
    int64_t image_size = 64;
    double train_fraction = 0.6;
    double val_fraction = 0.2; // the rest is test
    double grain_min = 0.02;
    double grain_max = 0.04;
    double texture = 0.15;     // amplitude of the 1/f texture waves
    int texture_waves = 12;
    ArtifactSpec artifact;

    void validate() const;
};

/// Where the injected artifact of one fake sample sits, in pixels (half-open).
struct ArtifactBox {
    int64_t top = 0, left = 0, bottom = 0, right = 0;
    std::vector<int> bands;
};

struct Sample {
    torch::Tensor image; // (3, h, w) in [0, 1], already 8-bit quantized
    int label = 0;       // 0 real, 1 fake
    std::optional<ArtifactBox> artifact;
};

/// One deterministic sample, keyed by (seed, label, index).
Sample synthesize(const GeneratorConfig& config, int label, int index);

/// Split of sample index within its class.
Split split_of(const GeneratorConfig& config, int index);

struct ManifestRecord {
    std::string path; // relative to the manifest's directory
    int label = 0;
    Split split = Split::train;
};

struct DatasetManifest {
    std::filesystem::path root; // directory containing the manifest
    std::vector<ManifestRecord> records;
    std::optional<uint64_t> seed;

    std::size_t count(Split split) const;
};

/// path<TAB>label<TAB>split lines, no header.
void write_manifest(const std::filesystem::path& file, const DatasetManifest& manifest);
/// Accepts a manifest file or a directory containing manifest.tsv. Checks labels, splits and file existence.
DatasetManifest read_manifest(const std::filesystem::path& file_or_dir);

inline constexpr const char* kManifestName = "manifest.tsv";
inline constexpr const char* kDatasetInfoName = "dataset.json";

/**
 * Writes images/<split>/<real|fake>_<index>.ppm, manifest.tsv, and dataset.json
 * (generator settings and artifact boxes) under out_dir.
 */
DatasetManifest generate_synthetic_dataset(const std::filesystem::path& out_dir, const GeneratorConfig& config);

/// In-memory image batch of one split.
struct LabeledImages {
    torch::Tensor images; // (n, 3, h, w) float32
    torch::Tensor labels; // (n,) int64
    std::vector<std::string> paths;

    int64_t size() const { return labels.defined() ? labels.size(0) : 0; }
};

LabeledImages load_split(const DatasetManifest& manifest, Split split);

/// Images synthesized directly in memory (no disk round trip), same content as generate_synthetic_dataset.
LabeledImages synthesize_split(const GeneratorConfig& config, Split split);

} // namespace freqforge::harness
