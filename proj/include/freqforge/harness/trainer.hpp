#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "freqforge/harness/augment.hpp"
#include "freqforge/harness/dataset.hpp"
#include "freqforge/harness/metrics.hpp"
#include "freqforge/network.hpp"

namespace freqforge::harness {

struct TrainConfig {
    double lr = 5e-4;
    double decay_factor = 0.5;
    int decay_every = 5; // epochs
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch = 32;
    int epochs = 10;
    int64_t max_steps = 0; // 0 = no cap
    uint64_t seed = 0;     // network initialization, shuffling, augmentation
    int eval_batch = 64;
    AugmentPolicy augment;

    void validate() const;
};

/// lr * decay_factor^floor(epoch / decay_every).
double learning_rate(const TrainConfig& config, int epoch);

struct TrainResult {
    network::TripleStreamNet model{nullptr}; // parameters of the best-validation epoch
    std::vector<EpochRecord> history;
    std::vector<miloss::LossRecord> steps;
    std::optional<double> best_val_auc;
    int best_epoch = -1; // -1: initialization (no epoch run)
    int64_t total_steps = 0;
};

struct TrainHooks {
    /// Called after each epoch with the live model; `best` tells whether it became the best one.
    std::function<void(const network::TripleStreamNet&, const EpochRecord&, bool best)> on_epoch;
    std::function<void(const std::string&)> log;
};

/**
 * Adam with step decay over the train split; validation after every epoch; the
 * returned model holds the best-validation-AUC parameters. Throws NanLossError on
 * a non-finite loss.
 */
TrainResult train(const network::NetworkConfig& net_config, const TrainConfig& config, const LabeledImages& train_set,
                  const LabeledImages& val_set, const TrainHooks& hooks = {});

/// Eval-mode margins and probabilities for every image.
Scores score(network::TripleStreamNet& net, const torch::Tensor& images, const torch::Tensor& labels, int batch = 64);

MetricsReport evaluate(network::TripleStreamNet& net, const LabeledImages& data, const std::string& split, int batch = 64);

/// Copies parameters and buffers from src into dst (same architecture).
void copy_state(const network::TripleStreamNet& src, network::TripleStreamNet& dst);

} // namespace freqforge::harness
