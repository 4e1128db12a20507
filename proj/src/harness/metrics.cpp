#include "freqforge/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "freqforge/errors.hpp"

namespace freqforge::harness {

namespace {

void check_sizes(std::size_t a, std::size_t b) {
    if (a != b) throw InvalidInput("scores and labels differ in length");
}

} // namespace

double accuracy(std::span<const double> p_fake, std::span<const int> labels, double threshold) {
    check_sizes(p_fake.size(), labels.size());
    if (labels.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += (p_fake[i] >= threshold ? 1 : 0) == labels[i];
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_sizes(scores.size(), labels.size());
    for (double s : scores)
        if (!std::isfinite(s)) throw InvalidInput("roc_auc needs finite scores");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Sum of midranks of the positives.
    double rank_sum = 0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j); // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum += midrank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) return std::nullopt;
    const double np = static_cast<double>(positives), nn = static_cast<double>(negatives);
    return (rank_sum - np * (np + 1) / 2) / (np * nn);
}

double f1_score(std::span<const double> p_fake, std::span<const int> labels, double threshold) {
    check_sizes(p_fake.size(), labels.size());
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = p_fake[i] >= threshold;
        if (pred && labels[i] == 1) ++tp;
        else if (pred) ++fp;
        else if (labels[i] == 1) ++fn;
    }
    if (tp == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

MetricsReport report_from_scores(const Scores& s, const std::string& split) {
    MetricsReport r;
    r.split = split;
    r.count = static_cast<int64_t>(s.labels.size());
    r.acc = accuracy(s.p_fake, s.labels);
    r.auc = roc_auc(s.margin, s.labels);
    r.f1 = f1_score(s.p_fake, s.labels);
    return r;
}

nlohmann::json to_json(const miloss::LossRecord& r) {
    return {{"l_ce", r.l_ce}, {"l_d", r.l_d},   {"l_gia", r.l_gia}, {"l_total", r.l_total},
            {"ce_weight", r.ce_weight}, {"alpha", r.alpha}, {"beta", r.beta}};
}

miloss::LossRecord loss_record_from_json(const nlohmann::json& j) {
    miloss::LossRecord r;
    r.l_ce = j.at("l_ce").get<double>();
    r.l_d = j.at("l_d").get<double>();
    r.l_gia = j.at("l_gia").get<double>();
    r.l_total = j.at("l_total").get<double>();
    r.ce_weight = j.at("ce_weight").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.beta = j.at("beta").get<double>();
    return r;
}

nlohmann::json to_json(const EpochRecord& r) {
    nlohmann::json j{{"epoch", r.epoch}, {"lr", r.lr}, {"steps", r.steps}, {"loss", to_json(r.mean)}, {"val_acc", r.val_acc}};
    j["val_auc"] = r.val_auc ? nlohmann::json(*r.val_auc) : nlohmann::json(nullptr);
    return j;
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.lr = j.at("lr").get<double>();
    r.steps = j.at("steps").get<int64_t>();
    r.mean = loss_record_from_json(j.at("loss"));
    r.val_acc = j.at("val_acc").get<double>();
    if (!j.at("val_auc").is_null()) r.val_auc = j.at("val_auc").get<double>();
    return r;
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["split"] = r.split;
    j["count"] = r.count;
    j["acc"] = r.acc;
    j["auc"] = r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr);
    j["f1"] = r.f1;
    j["history"] = nlohmann::json::array();
    for (const auto& e : r.history) j["history"].push_back(to_json(e));
    return j;
}

} // namespace freqforge::harness
