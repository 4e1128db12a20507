#include "freqforge/harness/experiments.hpp"

#include <chrono>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "freqforge/errors.hpp"
#include "freqforge/harness/image_io.hpp"

namespace freqforge::harness {

namespace {

std::optional<double> mean_auc(const std::vector<RunSummary>& runs, bool test) {
    if (runs.empty()) return std::nullopt;
    double sum = 0;
    for (const auto& r : runs) {
        const auto& auc = test ? r.test.auc : r.val.auc;
        if (!auc) return std::nullopt;
        sum += *auc;
    }
    return sum / static_cast<double>(runs.size());
}

template <class F> double mean_of(const std::vector<RunSummary>& runs, F f) {
    if (runs.empty()) return 0;
    double sum = 0;
    for (const auto& r : runs) sum += f(r);
    return sum / static_cast<double>(runs.size());
}

std::string fixed(std::optional<double> v, int width = 8) {
    char buf[32];
    if (v) {
        std::snprintf(buf, sizeof buf, "%*.4f", width, *v);
    } else {
        std::snprintf(buf, sizeof buf, "%*s", width, "n/a");
    }
    return buf;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

} // namespace

std::optional<double> ComparisonRow::mean_val_auc() const { return mean_auc(runs, false); }
std::optional<double> ComparisonRow::mean_test_auc() const { return mean_auc(runs, true); }
double ComparisonRow::mean_val_acc() const { return mean_of(runs, [](const RunSummary& r) { return r.val.acc; }); }
double ComparisonRow::mean_test_acc() const { return mean_of(runs, [](const RunSummary& r) { return r.test.acc; }); }
double ComparisonRow::mean_test_f1() const { return mean_of(runs, [](const RunSummary& r) { return r.test.f1; }); }

const ComparisonRow& ComparisonTable::row(const std::string& key) const {
    for (const auto& r : rows)
        if (r.key == key) return r;
    throw InvalidInput("no row '" + key + "' in table '" + title + "'");
}

ComparisonRow run_seeds(const std::string& key, const std::string& name, const network::NetworkConfig& net_config,
                        TrainConfig train_config, const std::vector<uint64_t>& seeds, const LabeledImages& train_set,
                        const LabeledImages& val_set, const LabeledImages& test_set, const Log& log) {
    ComparisonRow row{key, name, {}};
    for (uint64_t seed : seeds) {
        train_config.seed = seed;
        const auto start = std::chrono::steady_clock::now();
        auto result = train(net_config, train_config, train_set, val_set);
        RunSummary run;
        run.seed = seed;
        run.val = evaluate(result.model, val_set, "val", train_config.eval_batch);
        run.test = evaluate(result.model, test_set, "test", train_config.eval_batch);
        run.best_epoch = result.best_epoch;
        run.steps = result.total_steps;
        run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (log) {
            std::ostringstream msg;
            msg << name << " seed " << seed << ": val auc" << fixed(run.val.auc, 7) << ", test auc" << fixed(run.test.auc, 7)
                << ", test acc" << fixed(run.test.acc, 7) << " (best epoch " << run.best_epoch << ", " << run.seconds << " s)";
            log(msg.str());
        }
        row.runs.push_back(std::move(run));
    }
    return row;
}

ComparisonTable run_ablation(const network::NetworkConfig& base, const TrainConfig& train_config, const AblationConfig& ablation,
                             const LabeledImages& train_set, const LabeledImages& val_set, const LabeledImages& test_set,
                             const Log& log) {
    ComparisonTable table{"ablation", {}};
    for (auto variant : ablation.variants) {
        auto config = base;
        config.variant = variant;
        config.validate();
        table.rows.push_back(run_seeds(network::key(variant), network::display_name(variant), config, train_config, ablation.seeds,
                                       train_set, val_set, test_set, log));
    }
    return table;
}

ComparisonTable run_k_sweep(const network::NetworkConfig& base, const TrainConfig& train_config, const AblationConfig& ablation,
                            const LabeledImages& train_set, const LabeledImages& val_set, const LabeledImages& test_set,
                            const Log& log) {
    if (!base.uses_frequency()) throw ConfigError("the K sweep needs a variant with frequency branches");
    ComparisonTable table{"k_sweep", {}};
    for (int k : ablation.k_values) {
        auto config = base;
        config.k = k;
        config.validate();
        const auto key = "k=" + std::to_string(k);
        table.rows.push_back(run_seeds(key, "K = " + std::to_string(k), config, train_config, ablation.seeds, train_set, val_set,
                                       test_set, log));
    }
    return table;
}

nlohmann::json to_json(const ComparisonTable& table) {
    auto rows = nlohmann::json::array();
    for (const auto& row : table.rows) {
        auto runs = nlohmann::json::array();
        for (const auto& r : row.runs) {
            auto val = to_json(r.val);
            auto test = to_json(r.test);
            val.erase("history");
            test.erase("history");
            runs.push_back({{"seed", r.seed},
                            {"val", val},
                            {"test", test},
                            {"best_epoch", r.best_epoch},
                            {"steps", r.steps},
                            {"seconds", r.seconds}});
        }
        rows.push_back({{"key", row.key},
                        {"name", row.name},
                        {"mean_val_auc", optional_json(row.mean_val_auc())},
                        {"mean_test_auc", optional_json(row.mean_test_auc())},
                        {"mean_val_acc", row.mean_val_acc()},
                        {"mean_test_acc", row.mean_test_acc()},
                        {"mean_test_f1", row.mean_test_f1()},
                        {"runs", runs}});
    }
    return {{"title", table.title}, {"rows", rows}};
}

std::string format_table(const ComparisonTable& table) {
    std::size_t width = 8;
    for (const auto& row : table.rows) width = std::max(width, row.name.size());
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s %8s %8s %8s %8s %5s\n", static_cast<int>(width), "model", "val_auc", "test_auc",
                  "test_acc", "test_f1", "seeds");
    out << buf;
    for (const auto& row : table.rows) {
        std::snprintf(buf, sizeof buf, "%-*s %s %s %8.4f %8.4f %5zu\n", static_cast<int>(width), row.name.c_str(),
                      fixed(row.mean_val_auc()).c_str(), fixed(row.mean_test_auc()).c_str(), row.mean_test_acc(), row.mean_test_f1(),
                      row.runs.size());
        out << buf;
    }
    return out.str();
}

std::vector<Degradation> RobustnessConfig::default_conditions() {
    std::vector<Degradation> out(4);
    out[0].kind = Degradation::Kind::none;
    out[1].kind = Degradation::Kind::compression;
    out[2].kind = Degradation::Kind::gaussian;
    out[3].kind = Degradation::Kind::iso;
    return out;
}

LabeledImages degrade(const LabeledImages& data, const Degradation& degradation, uint64_t seed) {
    if (degradation.kind == Degradation::Kind::none) return data;
    LabeledImages out = data;
    out.images = torch::empty_like(data.images);
    for (int64_t i = 0; i < data.size(); ++i) {
        auto rng = make_rng(seed, {0xDE6, static_cast<uint64_t>(degradation.kind), static_cast<uint64_t>(i)});
        // Degraded images are stored like any other 8-bit file.
        out.images[i] = quantize_8bit(degradation.apply(data.images[i], rng));
    }
    return out;
}

std::vector<RobustnessRow> run_robustness(network::TripleStreamNet& net, const LabeledImages& test_set,
                                          const RobustnessConfig& config, int batch) {
    std::vector<RobustnessRow> rows;
    for (const auto& condition : config.conditions) {
        auto data = degrade(test_set, condition, config.seed);
        rows.push_back({condition, evaluate(net, data, "test", batch)});
    }
    return rows;
}

nlohmann::json to_json(const std::vector<RobustnessRow>& rows) {
    auto out = nlohmann::json::array();
    for (const auto& row : rows) {
        auto report = to_json(row.report);
        report.erase("history");
        nlohmann::json severity = nlohmann::json::object();
        switch (row.condition.kind) {
        case Degradation::Kind::compression: severity["quality"] = row.condition.quality; break;
        case Degradation::Kind::gaussian: severity["sigma"] = row.condition.sigma; break;
        case Degradation::Kind::iso:
            severity["gain"] = row.condition.iso_gain;
            severity["read_sigma"] = row.condition.iso_read;
            break;
        case Degradation::Kind::none: break;
        }
        out.push_back({{"condition", row.condition.name()}, {"severity", severity}, {"metrics", report}});
    }
    return out;
}

std::string format_table(const std::vector<RobustnessRow>& rows) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %8s %8s %8s\n", "condition", "auc", "acc", "f1");
    out << buf;
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%-12s %s %8.4f %8.4f\n", row.condition.name().c_str(), fixed(row.report.auc).c_str(),
                      row.report.acc, row.report.f1);
        out << buf;
    }
    return out.str();
}

} // namespace freqforge::harness
