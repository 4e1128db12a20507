// freqforge command-line entry point.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "freqforge/config.hpp"
#include "freqforge/errors.hpp"
#include "freqforge/freq.hpp"
#include "freqforge/harness/checkpoint.hpp"
#include "freqforge/harness/dataset.hpp"
#include "freqforge/harness/experiments.hpp"
#include "freqforge/harness/gradcam.hpp"
#include "freqforge/harness/image_io.hpp"
#include "freqforge/harness/trainer.hpp"

namespace fs = std::filesystem;
using namespace freqforge;
using namespace freqforge::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> overrides;
    std::optional<uint64_t> seed;
    std::string out;
    std::string data;
};

void add_config_flags(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_file, "INI configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", o.overrides, "Override one key, e.g. --set train.lr=1e-3 (repeatable)");
}

config::RunConfig resolve(const CommonOptions& o) {
    config::RunConfig c;
    if (!o.config_file.empty()) c = config::load_ini(o.config_file);
    for (const auto& s : o.overrides) config::apply_override(c, s);
    c.validate();
    return c;
}

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
}

void write_json(const fs::path& file, const nlohmann::json& j) { write_text(file, j.dump(2) + "\n"); }

void log_line(const std::string& line) { std::cerr << line << std::endl; }

config::RunConfig data_config_of(const DatasetManifest& manifest, config::RunConfig c) {
    // Keep the generator section in step with the data actually used.
    if (manifest.seed) c.data.seed = *manifest.seed;
    return c;
}

int cmd_generate(const CommonOptions& o, std::optional<int> n) {
    auto c = resolve(o);
    if (o.seed) c.data.seed = *o.seed;
    if (n) c.data.n_per_class = *n;
    c.validate();
    const auto manifest = generate_synthetic_dataset(o.out, c.data);
    write_text(fs::path(o.out) / "resolved.ini", config::to_ini(c));
    log_line("wrote " + std::to_string(manifest.records.size()) + " images to " + o.out);
    return kExitOk;
}

int cmd_train(const CommonOptions& o) {
    auto c = resolve(o);
    if (o.seed) c.train.seed = *o.seed;
    c.validate();
    const auto manifest = read_manifest(o.data);
    c = data_config_of(manifest, c);
    const fs::path out = o.out;
    fs::create_directories(out);
    const auto ini = config::to_ini(c);
    write_text(out / "resolved.ini", ini);

    const auto train_set = load_split(manifest, Split::train);
    const auto val_set = load_split(manifest, Split::val);
    log_line("training " + network::display_name(c.model.variant) + " on " + std::to_string(train_set.size()) + " images");

    CheckpointMeta meta{c.model, c.train, -1, {}, std::nullopt, ini};
    TrainHooks hooks;
    std::vector<EpochRecord> history;
    hooks.log = log_line;
    hooks.on_epoch = [&](const network::TripleStreamNet& net, const EpochRecord& record, bool best) {
        history.push_back(record);
        auto m = meta;
        m.epoch = record.epoch;
        m.history = history;
        m.val_auc = record.val_auc;
        save_checkpoint(out / "last.ckpt", net, m);
        if (best) save_checkpoint(out / "best.ckpt", net, m);
    };

    TrainResult result;
    try {
        result = train(c.model, c.train, train_set, val_set, hooks);
    } catch (const NanLossError& e) {
        nlohmann::json components = nlohmann::json::object();
        for (const auto& [name, value] : e.components()) {
            // JSON has no NaN or Inf; keep them as strings.
            components[name] = std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(std::to_string(value));
        }
        nlohmann::json dump{{"error", e.what()}, {"epoch", e.epoch()}, {"batch_index", e.batch_index()}, {"loss_components", components}};
        write_json(out / "nan_dump.json", dump);
        throw;
    }

    if (result.history.empty()) {
        // No epoch ran: the initialization is both the last and the best state.
        save_checkpoint(out / "last.ckpt", result.model, meta);
        save_checkpoint(out / "best.ckpt", result.model, meta);
    }
    auto epochs = nlohmann::json::array();
    for (const auto& e : result.history) epochs.push_back(to_json(e));
    auto steps = nlohmann::json::array();
    for (const auto& s : result.steps) steps.push_back(to_json(s));
    write_json(out / "history.json", {{"best_epoch", result.best_epoch},
                                      {"best_val_auc", result.best_val_auc ? nlohmann::json(*result.best_val_auc) : nlohmann::json()},
                                      {"total_steps", result.total_steps},
                                      {"epochs", epochs},
                                      {"steps", steps}});
    auto report = evaluate(result.model, val_set, "val", c.train.eval_batch);
    report.history = result.history;
    write_json(out / "metrics_val.json", to_json(report));
    log_line("best epoch " + std::to_string(result.best_epoch) + ", checkpoints in " + out.string());
    return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& split, const std::string& out) {
    auto loaded = load_checkpoint(ckpt);
    const auto manifest = read_manifest(data);
    const auto set = load_split(manifest, parse_split(split));
    auto report = evaluate(loaded.net, set, split, loaded.meta.train.eval_batch);
    report.history = loaded.meta.history;
    const auto j = to_json(report);
    std::cout << j.dump() << std::endl;
    if (!out.empty()) write_json(fs::path(out) / ("metrics_" + split + ".json"), j);
    return kExitOk;
}

int cmd_ablate(const CommonOptions& o, const std::string& what) {
    auto c = resolve(o);
    if (o.seed) {
        for (std::size_t i = 0; i < c.ablation.seeds.size(); ++i) c.ablation.seeds[i] = *o.seed + i;
    }
    const auto manifest = read_manifest(o.data);
    c = data_config_of(manifest, c);
    const fs::path out = o.out;
    fs::create_directories(out);
    write_text(out / "resolved.ini", config::to_ini(c));
    const auto train_set = load_split(manifest, Split::train);
    const auto val_set = load_split(manifest, Split::val);
    const auto test_set = load_split(manifest, Split::test);

    std::ofstream log_file(out / "ablate.log");
    Log log = [&](const std::string& line) {
        log_line(line);
        log_file << line << std::endl;
    };
    nlohmann::json result = nlohmann::json::object();
    if (what == "components" || what == "all") {
        const auto table = run_ablation(c.model, c.train, c.ablation, train_set, val_set, test_set, log);
        result["ablation"] = to_json(table);
        write_text(out / "ablation.txt", format_table(table));
        log("\n" + format_table(table));
    }
    if (what == "k" || what == "all") {
        const auto table = run_k_sweep(c.model, c.train, c.ablation, train_set, val_set, test_set, log);
        result["k_sweep"] = to_json(table);
        write_text(out / "k_sweep.txt", format_table(table));
        log("\n" + format_table(table));
    }
    write_json(out / "ablation.json", result);
    return kExitOk;
}

int cmd_robustness(const CommonOptions& o, const std::string& ckpt) {
    auto c = resolve(o);
    if (o.seed) c.robustness.seed = *o.seed;
    auto loaded = load_checkpoint(ckpt);
    const auto manifest = read_manifest(o.data);
    const auto test_set = load_split(manifest, Split::test);
    const auto rows = run_robustness(loaded.net, test_set, c.robustness, loaded.meta.train.eval_batch);
    const fs::path out = o.out;
    write_text(out / "resolved.ini", config::to_ini(c));
    write_json(out / "robustness.json", to_json(rows));
    write_text(out / "robustness.txt", format_table(rows));
    log_line(format_table(rows));
    return kExitOk;
}

int cmd_analyze_freq(const std::string& image_path, const std::string& out_dir) {
    const auto pixels = read_image(image_path);
    const auto h = pixels.size(1), w = pixels.size(2);
    const auto padded = freq::pad_to_blocks(freq::Image(pixels));
    const auto coeffs = freq::block_dct(padded);
    const auto energy = freq::band_energy(coeffs);
    double total = 0;
    for (double e : energy) total += e;

    const auto& rank = freq::zigzag_rank();
    auto bands = nlohmann::json::array();
    std::ostringstream grid;
    grid << "energy share per band (%), row u, column v\n";
    for (int b = 0; b < 64; ++b) {
        const double share = total > 0 ? 100.0 * energy[b] / total : 0.0;
        bands.push_back({{"band", b}, {"u", freq::band_row(b)}, {"v", freq::band_col(b)}, {"zigzag_rank", rank[b]}, {"energy", energy[b]}, {"percent", share}});
        char cell[16];
        std::snprintf(cell, sizeof cell, "%7.3f", share);
        grid << cell << (freq::band_col(b) == 7 ? "\n" : " ");
    }
    const fs::path out = out_dir;
    write_json(out / "band_energy.json", {{"image", image_path}, {"total_energy", total}, {"bands", bands}});
    write_text(out / "band_energy.txt", grid.str());

    // Band-pass views by zigzag position; the non-DC views are zero-mean and shown around mid-gray.
    struct Range {
        const char* name;
        int first, last;
    };
    for (const Range r : {Range{"low", 0, 9}, Range{"mid", 10, 35}, Range{"high", 36, 63}}) {
        std::vector<int> kept(freq::zigzag_order().begin() + r.first, freq::zigzag_order().begin() + r.last + 1);
        auto rec = freq::crop(freq::reconstruct_from_channels(coeffs, freq::ChannelSet(kept)), h, w).pixels();
        if (r.first > 0) rec = rec + 0.5;
        write_image(out / (std::string("band_") + r.name + ".ppm"), rec);
    }
    std::cout << nlohmann::json{{"total_energy", total}, {"dc_percent", total > 0 ? 100.0 * energy[0] / total : 0.0}}.dump() << std::endl;
    return kExitOk;
}

int cmd_cam(const std::string& ckpt, const std::string& image_path, const std::string& out_dir, const std::string& branch) {
    auto loaded = load_checkpoint(ckpt);
    const auto image = read_image(image_path);
    if (image.size(0) != 3) throw InvalidInput("cam expects a color (P6) image");
    std::vector<Branch> branches = branch == "all" ? available_branches(loaded.meta.network) : std::vector<Branch>{parse_branch(branch)};
    auto files = nlohmann::json::array();
    for (auto b : branches) {
        const auto map = attention_heatmap(loaded.net, image, b);
        const auto file = fs::path(out_dir) / ("cam_" + to_string(b) + ".pgm");
        write_image(file, map.unsqueeze(0));
        files.push_back(file.string());
    }
    std::cout << nlohmann::json{{"heatmaps", files}}.dump() << std::endl;
    return kExitOk;
}

void apply_thread_cap() {
    if (const char* env = std::getenv("FREQFORGE_THREADS")) {
        const int n = std::atoi(env);
        if (n <= 0) throw ConfigError("FREQFORGE_THREADS must be a positive integer");
        torch::set_num_threads(n);
        torch::set_num_interop_threads(n);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"freqforge: triple-stream frequency deepfake detector"};
    app.require_subcommand(1);

    CommonOptions gen_o, train_o, ablate_o, rob_o;
    std::optional<int> gen_n;
    auto* gen = app.add_subcommand("generate", "Write a synthetic real/fake image dataset");
    add_config_flags(gen, gen_o);
    gen->add_option("--seed", gen_o.seed, "Generator seed");
    gen->add_option("--n", gen_n, "Images per class")->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_o.out, "Output directory")->required();

    auto* tr = app.add_subcommand("train", "Train a detector");
    add_config_flags(tr, train_o);
    tr->add_option("--seed", train_o.seed, "Training seed");
    tr->add_option("--data", train_o.data, "Dataset directory or manifest")->required();
    tr->add_option("--out", train_o.out, "Output directory")->required();

    std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on one split; prints a JSON report");
    ev->add_option("--ckpt", eval_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", eval_data, "Dataset directory or manifest")->required();
    ev->add_option("--split", eval_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
    ev->add_option("--out", eval_out, "Also write metrics_<split>.json here");

    std::string ablate_what = "all";
    auto* ab = app.add_subcommand("ablate", "Component ablation and channel-count sweep");
    add_config_flags(ab, ablate_o);
    ab->add_option("--seed", ablate_o.seed, "First seed; the configured seed count is kept");
    ab->add_option("--data", ablate_o.data, "Dataset directory or manifest")->required();
    ab->add_option("--out", ablate_o.out, "Output directory")->required();
    ab->add_option("--what", ablate_what, "components, k or all")->check(CLI::IsMember({"components", "k", "all"}));

    std::string rob_ckpt;
    auto* rb = app.add_subcommand("robustness", "Evaluate a checkpoint under compression and noise");
    add_config_flags(rb, rob_o);
    rb->add_option("--seed", rob_o.seed, "Degradation seed");
    rb->add_option("--ckpt", rob_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    rb->add_option("--data", rob_o.data, "Dataset directory or manifest")->required();
    rb->add_option("--out", rob_o.out, "Output directory")->required();

    std::string af_image, af_out;
    auto* af = app.add_subcommand("analyze-freq", "Per-band DCT energy and band-pass reconstructions of an image");
    af->add_option("--image", af_image, "PPM/PGM image")->required()->check(CLI::ExistingFile);
    af->add_option("--out", af_out, "Output directory")->required();

    std::string cam_ckpt, cam_image, cam_out, cam_branch = "all";
    auto* cm = app.add_subcommand("cam", "Grad-CAM heatmaps per branch");
    cm->add_option("--ckpt", cam_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
    cm->add_option("--image", cam_image, "PPM image")->required()->check(CLI::ExistingFile);
    cm->add_option("--out", cam_out, "Output directory")->required();
    cm->add_option("--branch", cam_branch, "rgb, primary, secondary or all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        apply_thread_cap();
        if (gen->parsed()) return cmd_generate(gen_o, gen_n);
        if (tr->parsed()) return cmd_train(train_o);
        if (ev->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_out);
        if (ab->parsed()) return cmd_ablate(ablate_o, ablate_what);
        if (rb->parsed()) return cmd_robustness(rob_o, rob_ckpt);
        if (af->parsed()) return cmd_analyze_freq(af_image, af_out);
        if (cm->parsed()) return cmd_cam(cam_ckpt, cam_image, cam_out, cam_branch);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << std::endl;
        return kExitConfig;
    } catch (const NanLossError& e) {
        std::cerr << "training aborted: " << e.what() << " (epoch " << e.epoch() << ", batch " << e.batch_index() << ")" << std::endl;
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitRuntime;
    }
    return kExitConfig;
}
