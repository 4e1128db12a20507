#include "freqforge/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "freqforge/config.hpp"
#include "freqforge/errors.hpp"

namespace freqforge::harness {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are written in host byte order");

std::map<std::string, torch::Tensor> state_of(const network::TripleStreamNet& net) {
    std::map<std::string, torch::Tensor> state;
    for (const auto& p : net->named_parameters(true)) state.emplace("param:" + p.key(), p.value());
    for (const auto& b : net->named_buffers(true)) state.emplace("buffer:" + b.key(), b.value());
    return state;
}

std::string dtype_name(torch::ScalarType t) {
    switch (t) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    default: throw CheckpointError(std::string("unsupported tensor dtype ") + c10::toString(t));
    }
}

torch::ScalarType parse_dtype(const std::string& s) {
    if (s == "f32") return torch::kFloat32;
    if (s == "f64") return torch::kFloat64;
    if (s == "i64") return torch::kInt64;
    throw CheckpointError("unknown tensor dtype '" + s + "'");
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

} // namespace

void save_checkpoint(const std::filesystem::path& file, const network::TripleStreamNet& net, const CheckpointMeta& meta) {
    auto history = nlohmann::json::array();
    for (const auto& e : meta.history) history.push_back(to_json(e));
    nlohmann::json header{{"network", config::to_json(meta.network)},
                          {"train", config::to_json(meta.train)},
                          {"epoch", meta.epoch},
                          {"history", history},
                          {"val_auc", optional_json(meta.val_auc)},
                          {"resolved_config", meta.resolved_config}};

    std::vector<torch::Tensor> blobs;
    auto table = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& [name, tensor] : state_of(net)) {
        auto t = tensor.detach().to(torch::kCPU).contiguous();
        const uint64_t nbytes = t.numel() * t.element_size();
        table.push_back({{"name", name}, {"dtype", dtype_name(t.scalar_type())}, {"shape", t.sizes().vec()}, {"offset", offset}, {"nbytes", nbytes}});
        offset += nbytes;
        blobs.push_back(std::move(t));
    }
    header["tensors"] = table;
    const std::string text = header.dump();

    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    auto tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write " + tmp.string());
        out << kCheckpointTag << '\n';
        const uint64_t len = text.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof len);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& t : blobs) out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
        out.flush();
        if (!out) throw CheckpointError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + file.string());
    std::string tag;
    std::getline(in, tag);
    if (tag != kCheckpointTag) throw CheckpointError(file.string() + " is not a " + std::string(kCheckpointTag) + " file");
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len > (uint64_t{1} << 32)) throw CheckpointError("truncated checkpoint header in " + file.string());
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw CheckpointError("truncated checkpoint header in " + file.string());

    LoadedCheckpoint out;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
        out.meta.network = config::network_config_from_json(header.at("network"));
        out.meta.train = config::train_config_from_json(header.at("train"));
        out.meta.epoch = header.at("epoch").get<int>();
        for (const auto& e : header.at("history")) out.meta.history.push_back(epoch_record_from_json(e));
        if (!header.at("val_auc").is_null()) out.meta.val_auc = header.at("val_auc").get<double>();
        out.meta.resolved_config = header.at("resolved_config").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
    }

    const auto blob_start = in.tellg();
    out.net = network::make_network(out.meta.network, out.meta.train.seed);
    auto state = state_of(out.net);
    std::size_t seen = 0;
    torch::NoGradGuard no_grad;
    for (const auto& entry : header.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        auto it = state.find(name);
        if (it == state.end()) throw CheckpointError("checkpoint tensor '" + name + "' does not exist in the network");
        const auto shape = entry.at("shape").get<std::vector<int64_t>>();
        const auto dtype = parse_dtype(entry.at("dtype").get<std::string>());
        if (it->second.sizes().vec() != shape || it->second.scalar_type() != dtype) {
            throw CheckpointError("checkpoint tensor '" + name + "' has a different shape or dtype than the network");
        }
        auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
        const auto nbytes = entry.at("nbytes").get<uint64_t>();
        if (nbytes != static_cast<uint64_t>(t.numel() * t.element_size())) throw CheckpointError("bad byte count for '" + name + "'");
        in.seekg(blob_start + static_cast<std::streamoff>(entry.at("offset").get<uint64_t>()));
        in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
        if (!in) throw CheckpointError("truncated tensor data for '" + name + "'");
        it->second.copy_(t);
        ++seen;
    }
    if (seen != state.size()) throw CheckpointError("checkpoint is missing network tensors");
    return out;
}

} // namespace freqforge::harness
