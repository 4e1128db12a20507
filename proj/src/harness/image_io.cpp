#include "freqforge/harness/image_io.hpp"

#include <fstream>
#include <string>
#include <vector>

#include "freqforge/errors.hpp"

namespace freqforge::harness {

namespace {

std::string next_token(std::istream& in) {
    std::string tok;
    char ch;
    while (in.get(ch)) {
        if (ch == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(ch);
    }
    return tok;
}

} // namespace

torch::Tensor read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open image " + path.string());
    const auto magic = next_token(in);
    int64_t channels = 0;
    if (magic == "P6") channels = 3;
    else if (magic == "P5") channels = 1;
    else throw InvalidInput(path.string() + ": only binary PPM/PGM (P6/P5) images are supported");
    int64_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoll(next_token(in));
        h = std::stoll(next_token(in));
        maxval = std::stoll(next_token(in));
    } catch (const std::exception&) {
        throw InvalidInput(path.string() + ": malformed header");
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw InvalidInput(path.string() + ": expected positive size and maxval 255");
    std::vector<uint8_t> bytes(static_cast<std::size_t>(w * h * channels));
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw InvalidInput(path.string() + ": truncated pixel data");
    auto hwc = torch::from_blob(bytes.data(), {h, w, channels}, torch::kUInt8).clone();
    return hwc.permute({2, 0, 1}).contiguous().to(torch::kFloat32) / 255.0;
}

torch::Tensor quantize_8bit(const torch::Tensor& pixels) {
    return (pixels.clamp(0.0, 1.0) * 255.0).round() / 255.0;
}

void write_image(const std::filesystem::path& path, const torch::Tensor& pixels) {
    auto chw = pixels.dim() == 2 ? pixels.unsqueeze(0) : pixels;
    if (chw.dim() != 3 || (chw.size(0) != 1 && chw.size(0) != 3)) throw InvalidInput("write_image expects (1|3, h, w)");
    auto bytes = (chw.detach().to(torch::kFloat32).clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8);
    bytes = bytes.permute({1, 2, 0}).contiguous();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << (chw.size(0) == 3 ? "P6" : "P5") << '\n' << chw.size(2) << ' ' << chw.size(1) << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data_ptr<uint8_t>()), static_cast<std::streamsize>(bytes.numel()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

} // namespace freqforge::harness
