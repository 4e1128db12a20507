#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqforge/harness/metrics.hpp"
#include "freqforge/harness/trainer.hpp"
#include "freqforge/network.hpp"

namespace freqforge::harness {

inline constexpr const char* kCheckpointTag = "freqforge-ckpt-v1";

/// Everything stored next to the parameter blobs.
struct CheckpointMeta {
    network::NetworkConfig network;
    TrainConfig train;
    int epoch = -1; // last finished epoch, -1 for the initialization
    std::vector<EpochRecord> history;
    std::optional<double> val_auc;
    std::string resolved_config; // INI text of the run, may be empty
};

/**
 * Layout: the tag line, an 8-byte little-endian header length, a JSON header
 * (meta plus a table of name/dtype/shape/offset/nbytes), then the raw tensor
 * bytes. Written to a temporary file and renamed into place.
 */
void save_checkpoint(const std::filesystem::path& file, const network::TripleStreamNet& net, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    network::TripleStreamNet net{nullptr};
};

/// Rebuilds the network from the stored config and loads every tensor; throws CheckpointError.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& file);

} // namespace freqforge::harness
