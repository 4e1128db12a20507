#include "freqforge/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "freqforge/errors.hpp"

namespace freqforge::config {

namespace {

using harness::Degradation;

std::string fmt(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, end) : std::to_string(v);
}
std::string fmt(int64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <class T> std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + f(v[i]);
    return s;
}

double to_double(const std::string& s) {
    double v = 0;
    const auto t = trim(s);
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("expected a number, got '" + s + "'");
    return v;
}

int64_t to_int(const std::string& s) {
    int64_t v = 0;
    const auto t = trim(s);
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    const auto t = trim(s);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError("expected a boolean, got '" + s + "'");
}

struct Field {
    std::string section, key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define FF_DOUBLE(sec, name, member)                                                                                   \
    Field { sec, name, [](const RunConfig& c) { return fmt(static_cast<double>(c.member)); },                          \
            [](RunConfig& c, const std::string& v) { c.member = to_double(v); } }
#define FF_INT(sec, name, member)                                                                                      \
    Field { sec, name, [](const RunConfig& c) { return fmt(static_cast<int64_t>(c.member)); },                         \
            [](RunConfig& c, const std::string& v) { c.member = static_cast<decltype(c.member)>(to_int(v)); } }
#define FF_BOOL(sec, name, member)                                                                                     \
    Field { sec, name, [](const RunConfig& c) { return fmt(static_cast<bool>(c.member)); },                            \
            [](RunConfig& c, const std::string& v) { c.member = to_bool(v); } }

const Degradation* find_condition(const RunConfig& c, Degradation::Kind kind) {
    for (const auto& d : c.robustness.conditions)
        if (d.kind == kind) return &d;
    return nullptr;
}

// Severities are kept per kind even when a kind is not listed in conditions.
struct Severities {
    int quality = 50;
    double sigma = 0.08, iso_gain = 0.03, iso_read = 0.01;
};

Severities severities(const RunConfig& c) {
    Severities s;
    if (auto* d = find_condition(c, Degradation::Kind::compression)) s.quality = d->quality;
    if (auto* d = find_condition(c, Degradation::Kind::gaussian)) s.sigma = d->sigma;
    if (auto* d = find_condition(c, Degradation::Kind::iso)) {
        s.iso_gain = d->iso_gain;
        s.iso_read = d->iso_read;
    }
    return s;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        // [data]
        f.push_back(FF_INT("data", "seed", data.seed));
        f.push_back(FF_INT("data", "n_per_class", data.n_per_class));
        f.push_back(FF_INT("data", "image_size", data.image_size));
        f.push_back(FF_DOUBLE("data", "train_fraction", data.train_fraction));
        f.push_back(FF_DOUBLE("data", "val_fraction", data.val_fraction));
        f.push_back(FF_DOUBLE("data", "grain_min", data.grain_min));
        f.push_back(FF_DOUBLE("data", "grain_max", data.grain_max));
        f.push_back(FF_DOUBLE("data", "texture", data.texture));
        f.push_back(FF_INT("data", "texture_waves", data.texture_waves));
        f.push_back({"data", "artifact_bands",
                     [](const RunConfig& c) { return join<int>(c.data.artifact.band_pool, [](const int& b) { return std::to_string(b); }); },
                     [](RunConfig& c, const std::string& v) {
                         c.data.artifact.band_pool.clear();
                         for (const auto& s : split_list(v)) c.data.artifact.band_pool.push_back(static_cast<int>(to_int(s)));
                     }});
        f.push_back(FF_INT("data", "bands_per_image", data.artifact.bands_per_image));
        f.push_back(FF_DOUBLE("data", "artifact_amplitude", data.artifact.amplitude));
        f.push_back(FF_DOUBLE("data", "amplitude_jitter", data.artifact.amplitude_jitter));
        f.push_back(FF_INT("data", "region_min_blocks", data.artifact.region_min_blocks));
        f.push_back(FF_INT("data", "region_max_blocks", data.artifact.region_max_blocks));
        // [model]
        f.push_back({"model", "variant", [](const RunConfig& c) { return network::key(c.model.variant); },
                     [](RunConfig& c, const std::string& v) { c.model.variant = network::parse_variant(trim(v)); }});
        f.push_back(FF_INT("model", "k", model.k));
        f.push_back(FF_DOUBLE("model", "alpha_rc", model.attention.alpha_rc));
        f.push_back(FF_INT("model", "attention_hidden", model.attention.hidden));
        f.push_back({"model", "attention_activation",
                     [](const RunConfig& c) { return std::string(c.model.attention.linear_activation ? "linear" : "relu"); },
                     [](RunConfig& c, const std::string& v) {
                         const auto t = trim(v);
                         if (t != "relu" && t != "linear") throw ConfigError("attention_activation must be relu or linear");
                         c.model.attention.linear_activation = t == "linear";
                     }});
        f.push_back({"model", "profile", [](const RunConfig& c) { return backbone::to_string(c.model.backbone.profile); },
                     [](RunConfig& c, const std::string& v) {
                         const bool share = c.model.backbone.share_frequency_weights;
                         c.model.backbone = backbone::parse_profile(trim(v)) == backbone::Profile::full
                                                ? backbone::BackboneConfig::full()
                                                : backbone::BackboneConfig::tiny();
                         c.model.backbone.share_frequency_weights = share;
                     }});
        f.push_back(FF_BOOL("model", "share_frequency_weights", model.backbone.share_frequency_weights));
        f.push_back(FF_INT("model", "reduced_channels", model.gfm.reduced_channels));
        f.push_back(FF_INT("model", "gamma_channels", model.gfm.gamma_channels));
        f.push_back(FF_INT("model", "global_channels", model.gfm.global_channels));
        // [loss]
        f.push_back({"loss", "weighting", [](const RunConfig& c) { return miloss::to_string(c.model.weighting); },
                     [](RunConfig& c, const std::string& v) { c.model.weighting = miloss::parse_weighting(trim(v)); }});
        f.push_back(FF_DOUBLE("loss", "alpha", model.alpha));
        f.push_back(FF_DOUBLE("loss", "beta", model.beta));
        // [train]
        f.push_back(FF_DOUBLE("train", "lr", train.lr));
        f.push_back(FF_DOUBLE("train", "decay_factor", train.decay_factor));
        f.push_back(FF_INT("train", "decay_every", train.decay_every));
        f.push_back(FF_DOUBLE("train", "beta1", train.beta1));
        f.push_back(FF_DOUBLE("train", "beta2", train.beta2));
        f.push_back(FF_DOUBLE("train", "eps", train.eps));
        f.push_back(FF_INT("train", "batch", train.batch));
        f.push_back(FF_INT("train", "epochs", train.epochs));
        f.push_back(FF_INT("train", "max_steps", train.max_steps));
        f.push_back(FF_INT("train", "seed", train.seed));
        f.push_back(FF_INT("train", "eval_batch", train.eval_batch));
        // [augment]
        f.push_back(FF_DOUBLE("augment", "crop", train.augment.crop));
        f.push_back(FF_DOUBLE("augment", "contrast", train.augment.contrast));
        f.push_back(FF_DOUBLE("augment", "blur", train.augment.blur));
        f.push_back(FF_DOUBLE("augment", "rotate", train.augment.rotate));
        f.push_back(FF_DOUBLE("augment", "grayscale", train.augment.grayscale));
        f.push_back(FF_DOUBLE("augment", "compress", train.augment.compress));
        f.push_back(FF_DOUBLE("augment", "gauss", train.augment.gauss));
        f.push_back(FF_DOUBLE("augment", "iso", train.augment.iso));
        f.push_back(FF_DOUBLE("augment", "crop_min_scale", train.augment.crop_min_scale));
        f.push_back(FF_DOUBLE("augment", "contrast_range", train.augment.contrast_range));
        f.push_back(FF_DOUBLE("augment", "blur_sigma_max", train.augment.blur_sigma_max));
        f.push_back(FF_DOUBLE("augment", "rotate_degrees", train.augment.rotate_degrees));
        f.push_back(FF_INT("augment", "quality_min", train.augment.quality_min));
        f.push_back(FF_INT("augment", "quality_max", train.augment.quality_max));
        f.push_back(FF_DOUBLE("augment", "gauss_sigma_max", train.augment.gauss_sigma_max));
        f.push_back(FF_DOUBLE("augment", "iso_gain_max", train.augment.iso_gain_max));
        f.push_back(FF_DOUBLE("augment", "iso_read_max", train.augment.iso_read_max));
        // [robustness]
        f.push_back({"robustness", "conditions",
                     [](const RunConfig& c) { return join<Degradation>(c.robustness.conditions, [](const Degradation& d) { return d.name(); }); },
                     [](RunConfig& c, const std::string& v) {
                         const auto keep = severities(c);
                         c.robustness.conditions.clear();
                         for (const auto& s : split_list(v)) {
                             Degradation d;
                             d.kind = harness::parse_degradation(s);
                             d.quality = keep.quality;
                             d.sigma = keep.sigma;
                             d.iso_gain = keep.iso_gain;
                             d.iso_read = keep.iso_read;
                             c.robustness.conditions.push_back(d);
                         }
                     }});
        f.push_back({"robustness", "quality", [](const RunConfig& c) { return fmt(static_cast<int64_t>(severities(c).quality)); },
                     [](RunConfig& c, const std::string& v) {
                         for (auto& d : c.robustness.conditions) d.quality = static_cast<int>(to_int(v));
                     }});
        f.push_back({"robustness", "gauss_sigma", [](const RunConfig& c) { return fmt(severities(c).sigma); },
                     [](RunConfig& c, const std::string& v) {
                         for (auto& d : c.robustness.conditions) d.sigma = to_double(v);
                     }});
        f.push_back({"robustness", "iso_gain", [](const RunConfig& c) { return fmt(severities(c).iso_gain); },
                     [](RunConfig& c, const std::string& v) {
                         for (auto& d : c.robustness.conditions) d.iso_gain = to_double(v);
                     }});
        f.push_back({"robustness", "iso_read", [](const RunConfig& c) { return fmt(severities(c).iso_read); },
                     [](RunConfig& c, const std::string& v) {
                         for (auto& d : c.robustness.conditions) d.iso_read = to_double(v);
                     }});
        f.push_back(FF_INT("robustness", "seed", robustness.seed));
        // [ablation]
        f.push_back({"ablation", "variants",
                     [](const RunConfig& c) { return join<network::Variant>(c.ablation.variants, [](const network::Variant& v) { return network::key(v); }); },
                     [](RunConfig& c, const std::string& v) {
                         c.ablation.variants.clear();
                         for (const auto& s : split_list(v)) c.ablation.variants.push_back(network::parse_variant(s));
                     }});
        f.push_back({"ablation", "seeds",
                     [](const RunConfig& c) { return join<uint64_t>(c.ablation.seeds, [](const uint64_t& s) { return std::to_string(s); }); },
                     [](RunConfig& c, const std::string& v) {
                         c.ablation.seeds.clear();
                         for (const auto& s : split_list(v)) c.ablation.seeds.push_back(static_cast<uint64_t>(to_int(s)));
                     }});
        f.push_back({"ablation", "k_values",
                     [](const RunConfig& c) { return join<int>(c.ablation.k_values, [](const int& k) { return std::to_string(k); }); },
                     [](RunConfig& c, const std::string& v) {
                         c.ablation.k_values.clear();
                         for (const auto& s : split_list(v)) c.ablation.k_values.push_back(static_cast<int>(to_int(s)));
                     }});
        return f;
    }();
    return table;
}

const Field& find_field(const std::string& section, const std::string& key) {
    for (const auto& f : fields())
        if (f.section == section && f.key == key) return f;
    throw ConfigError("unknown configuration key '" + section + "." + key + "'");
}

void set_field(RunConfig& c, const std::string& section, const std::string& key, const std::string& value) {
    const auto& f = find_field(section, key);
    try {
        f.set(c, value);
    } catch (const ConfigError& e) {
        throw ConfigError(section + "." + key + ": " + e.what());
    }
}

} // namespace

void RunConfig::validate() const {
    data.validate();
    model.validate();
    train.validate();
    if (ablation.seeds.empty()) throw ConfigError("ablation.seeds must not be empty");
    if (ablation.variants.empty()) throw ConfigError("ablation.variants must not be empty");
    for (int k : ablation.k_values) {
        if (k < 1 || 2 * k > 64) throw ConfigError("ablation.k_values entries must satisfy 1 <= K and 2K <= 64");
    }
    for (const auto& d : robustness.conditions) {
        if (d.quality < 1 || d.quality > 100 || d.sigma < 0 || d.iso_gain <= 0 || d.iso_read < 0) {
            throw ConfigError("bad robustness severity");
        }
    }
}

RunConfig parse_ini(const std::string& text, RunConfig base) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside of any section");
        for (const auto& [key, value] : body) set_field(base, section, key, value.data());
    }
    base.validate();
    return base;
}

RunConfig load_ini(const std::filesystem::path& file, RunConfig base) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read configuration file " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_ini(buf.str(), std::move(base));
}

void apply_override(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
    }
    set_field(config, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)), assignment.substr(eq + 1));
}

std::string to_ini(const RunConfig& config) {
    std::ostringstream out;
    std::string section;
    for (const auto& f : fields()) {
        if (f.section != section) {
            out << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
            section = f.section;
        }
        out << f.key << " = " << f.get(config) << '\n';
    }
    return out.str();
}

std::vector<std::pair<std::string, std::vector<std::string>>> known_keys() {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    for (const auto& f : fields()) {
        if (out.empty() || out.back().first != f.section) out.push_back({f.section, {}});
        out.back().second.push_back(f.key);
    }
    return out;
}

nlohmann::json to_json(const network::NetworkConfig& c) {
    return {{"variant", network::key(c.variant)},
            {"k", c.k},
            {"attention", {{"hidden", c.attention.hidden}, {"alpha_rc", c.attention.alpha_rc}, {"linear_activation", c.attention.linear_activation}}},
            {"backbone",
             {{"profile", backbone::to_string(c.backbone.profile)},
              {"channels", c.backbone.channels},
              {"share_frequency_weights", c.backbone.share_frequency_weights}}},
            {"gfm",
             {{"reduced_channels", c.gfm.reduced_channels},
              {"gamma_channels", c.gfm.gamma_channels},
              {"global_channels", c.gfm.global_channels},
              {"num_classes", c.gfm.num_classes}}},
            {"weighting", miloss::to_string(c.weighting)},
            {"alpha", c.alpha},
            {"beta", c.beta}};
}

network::NetworkConfig network_config_from_json(const nlohmann::json& j) {
    try {
        network::NetworkConfig c;
        c.variant = network::parse_variant(j.at("variant").get<std::string>());
        c.k = j.at("k").get<int>();
        const auto& a = j.at("attention");
        c.attention.hidden = a.at("hidden").get<int64_t>();
        c.attention.alpha_rc = a.at("alpha_rc").get<double>();
        c.attention.linear_activation = a.at("linear_activation").get<bool>();
        const auto& b = j.at("backbone");
        c.backbone.profile = backbone::parse_profile(b.at("profile").get<std::string>());
        c.backbone.channels = b.at("channels").get<std::array<int64_t, backbone::kStages>>();
        c.backbone.share_frequency_weights = b.at("share_frequency_weights").get<bool>();
        const auto& g = j.at("gfm");
        c.gfm.reduced_channels = g.at("reduced_channels").get<int64_t>();
        c.gfm.gamma_channels = g.at("gamma_channels").get<int64_t>();
        c.gfm.global_channels = g.at("global_channels").get<int64_t>();
        c.gfm.num_classes = g.at("num_classes").get<int64_t>();
        c.weighting = miloss::parse_weighting(j.at("weighting").get<std::string>());
        c.alpha = j.at("alpha").get<double>();
        c.beta = j.at("beta").get<double>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad network configuration snapshot: ") + e.what());
    }
}

nlohmann::json to_json(const harness::TrainConfig& c) {
    const auto& a = c.augment;
    return {{"lr", c.lr},
            {"decay_factor", c.decay_factor},
            {"decay_every", c.decay_every},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"batch", c.batch},
            {"epochs", c.epochs},
            {"max_steps", c.max_steps},
            {"seed", c.seed},
            {"eval_batch", c.eval_batch},
            {"augment",
             {{"crop", a.crop},
              {"contrast", a.contrast},
              {"blur", a.blur},
              {"rotate", a.rotate},
              {"grayscale", a.grayscale},
              {"compress", a.compress},
              {"gauss", a.gauss},
              {"iso", a.iso},
              {"crop_min_scale", a.crop_min_scale},
              {"contrast_range", a.contrast_range},
              {"blur_sigma_max", a.blur_sigma_max},
              {"rotate_degrees", a.rotate_degrees},
              {"quality_min", a.quality_min},
              {"quality_max", a.quality_max},
              {"gauss_sigma_max", a.gauss_sigma_max},
              {"iso_gain_max", a.iso_gain_max},
              {"iso_read_max", a.iso_read_max}}}};
}

harness::TrainConfig train_config_from_json(const nlohmann::json& j) {
    try {
        harness::TrainConfig c;
        c.lr = j.at("lr").get<double>();
        c.decay_factor = j.at("decay_factor").get<double>();
        c.decay_every = j.at("decay_every").get<int>();
        c.beta1 = j.at("beta1").get<double>();
        c.beta2 = j.at("beta2").get<double>();
        c.eps = j.at("eps").get<double>();
        c.batch = j.at("batch").get<int>();
        c.epochs = j.at("epochs").get<int>();
        c.max_steps = j.at("max_steps").get<int64_t>();
        c.seed = j.at("seed").get<uint64_t>();
        c.eval_batch = j.at("eval_batch").get<int>();
        const auto& a = j.at("augment");
        auto& p = c.augment;
        p.crop = a.at("crop").get<double>();
        p.contrast = a.at("contrast").get<double>();
        p.blur = a.at("blur").get<double>();
        p.rotate = a.at("rotate").get<double>();
        p.grayscale = a.at("grayscale").get<double>();
        p.compress = a.at("compress").get<double>();
        p.gauss = a.at("gauss").get<double>();
        p.iso = a.at("iso").get<double>();
        p.crop_min_scale = a.at("crop_min_scale").get<double>();
        p.contrast_range = a.at("contrast_range").get<double>();
        p.blur_sigma_max = a.at("blur_sigma_max").get<double>();
        p.rotate_degrees = a.at("rotate_degrees").get<double>();
        p.quality_min = a.at("quality_min").get<int>();
        p.quality_max = a.at("quality_max").get<int>();
        p.gauss_sigma_max = a.at("gauss_sigma_max").get<double>();
        p.iso_gain_max = a.at("iso_gain_max").get<double>();
        p.iso_read_max = a.at("iso_read_max").get<double>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad training configuration snapshot: ") + e.what());
    }
}

} // namespace freqforge::config
