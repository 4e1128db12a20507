#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqforge/harness/augment.hpp"
#include "freqforge/harness/trainer.hpp"
#include "freqforge/network.hpp"

namespace freqforge::harness {

struct AblationConfig {
    std::vector<network::Variant> variants{network::ablation_variants().begin(), network::ablation_variants().end()};
    std::vector<uint64_t> seeds{0, 1, 2};
    std::vector<int> k_values{2, 4, 6, 8, 16};
};

/// One training run evaluated on val and test.
struct RunSummary {
    uint64_t seed = 0;
    MetricsReport val;
    MetricsReport test;
    int best_epoch = -1;
    int64_t steps = 0;
    double seconds = 0;
};

struct ComparisonRow {
    std::string key;  // variant key or "k=8"
    std::string name; // table label
    std::vector<RunSummary> runs;

    /// Seed means; AUC means are undefined when any run lacks an AUC.
    std::optional<double> mean_val_auc() const;
    std::optional<double> mean_test_auc() const;
    double mean_val_acc() const;
    double mean_test_acc() const;
    double mean_test_f1() const;
};

struct ComparisonTable {
    std::string title;
    std::vector<ComparisonRow> rows;

    const ComparisonRow& row(const std::string& key) const;
};

using Log = std::function<void(const std::string&)>;

/// Trains and evaluates one configuration over several seeds.
ComparisonRow run_seeds(const std::string& key, const std::string& name, const network::NetworkConfig& net_config,
                        TrainConfig train_config, const std::vector<uint64_t>& seeds, const LabeledImages& train_set,
                        const LabeledImages& val_set, const LabeledImages& test_set, const Log& log = {});

/// Component ablation: every configured variant, same seeds and data.
ComparisonTable run_ablation(const network::NetworkConfig& base, const TrainConfig& train_config, const AblationConfig& ablation,
                             const LabeledImages& train_set, const LabeledImages& val_set, const LabeledImages& test_set,
                             const Log& log = {});

/// Channel-count sweep of the base variant over ablation.k_values.
ComparisonTable run_k_sweep(const network::NetworkConfig& base, const TrainConfig& train_config, const AblationConfig& ablation,
                            const LabeledImages& train_set, const LabeledImages& val_set, const LabeledImages& test_set,
                            const Log& log = {});

nlohmann::json to_json(const ComparisonTable& table);
/// Fixed-width text table with per-row seed means.
std::string format_table(const ComparisonTable& table);

struct RobustnessConfig {
    std::vector<Degradation> conditions = default_conditions();
    uint64_t seed = 0;

    static std::vector<Degradation> default_conditions();
};

/// The split with one degradation applied per image; image i always uses the stream (seed, kind, i).
LabeledImages degrade(const LabeledImages& data, const Degradation& degradation, uint64_t seed);

struct RobustnessRow {
    Degradation condition;
    MetricsReport report;
};

std::vector<RobustnessRow> run_robustness(network::TripleStreamNet& net, const LabeledImages& test_set,
                                          const RobustnessConfig& config, int batch = 64);

nlohmann::json to_json(const std::vector<RobustnessRow>& rows);
std::string format_table(const std::vector<RobustnessRow>& rows);

} // namespace freqforge::harness
