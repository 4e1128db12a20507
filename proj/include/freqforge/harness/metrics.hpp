#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqforge/miloss.hpp"

namespace freqforge::harness {

/// Fraction of correct decisions, predicting fake when probability >= threshold.
double accuracy(std::span<const double> p_fake, std::span<const int> labels, double threshold = 0.5);

/// Mann-Whitney AUC with midranks for ties; nullopt unless both classes are present.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

/// F1 of the fake class at the threshold; 0 when there are no true or predicted fakes.
double f1_score(std::span<const double> p_fake, std::span<const int> labels, double threshold = 0.5);

/// Per-epoch training summary.
struct EpochRecord {
    int epoch = 0;
    double lr = 0;
    int64_t steps = 0;
    miloss::LossRecord mean; // mean over the epoch's steps
    std::optional<double> val_auc;
    double val_acc = 0;
};

struct MetricsReport {
    std::string split;
    int64_t count = 0;
    double acc = 0;
    std::optional<double> auc;
    double f1 = 0;
    std::vector<EpochRecord> history;
};

/// Scores of a classifier on one split. margin = logit_fake - logit_real; p_fake = sigmoid(margin).
struct Scores {
    std::vector<double> margin;
    std::vector<double> p_fake;
    std::vector<int> labels;
};

/// ACC and F1 from p_fake, AUC from the margins (same ranking, no saturation ties).
MetricsReport report_from_scores(const Scores& scores, const std::string& split);

nlohmann::json to_json(const miloss::LossRecord& r);
miloss::LossRecord loss_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);
/// {"split", "count", "acc", "auc" (null when undefined), "f1", "history"}.
nlohmann::json to_json(const MetricsReport& r);

} // namespace freqforge::harness
