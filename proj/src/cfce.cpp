#include "freqforge/cfce.hpp"

#include "freqforge/errors.hpp"

namespace freqforge::cfce {

namespace {

void check_pair(const torch::Tensor& f1, const torch::Tensor& f2) {
    if (f1.sizes() != f2.sizes()) throw InvalidInput("cfce inputs must have identical shapes");
    if (f1.dim() != 3 && f1.dim() != 4) throw InvalidInput("cfce inputs must be (C, H, W) or (n, C, H, W)");
}

torch::Tensor flat(const torch::Tensor& f) {
    auto b = f.dim() == 3 ? f.unsqueeze(0) : f;
    return b.flatten(2); // (n, C, HW)
}

torch::Tensor batched_cosine(const torch::Tensor& a, const torch::Tensor& b) {
    auto dot = torch::bmm(a, b.transpose(1, 2));
    auto na = a.norm(2, {2}, true);                 // (n, C, 1)
    auto nb = b.norm(2, {2}, true).transpose(1, 2); // (n, 1, C)
    return dot / (na * nb + kCosineEps);
}

} // namespace

torch::Tensor cosine_map(const torch::Tensor& f1, const torch::Tensor& f2) {
    check_pair(f1, f2);
    auto s = batched_cosine(flat(f1), flat(f2));
    return f1.dim() == 3 ? s.squeeze(0) : s;
}

torch::Tensor enhance(const torch::Tensor& f1, const torch::Tensor& f2) {
    check_pair(f1, f2);
    auto a = flat(f1), b = flat(f2);
    auto s = batched_cosine(a, b);
    auto mix_b = torch::bmm(torch::softmax(s, -1), b);
    auto mix_a = torch::bmm(torch::softmax(s.transpose(1, 2), -1), a);
    auto merged = 0.5 * (a + mix_b) + 0.5 * (b + mix_a);
    return merged.reshape(f1.sizes());
}

std::vector<torch::Tensor> enhance_stages(const std::vector<torch::Tensor>& f1, const std::vector<torch::Tensor>& f2) {
    if (f1.size() != f2.size()) throw InvalidInput("stage counts differ between frequency branches");
    std::vector<torch::Tensor> out;
    out.reserve(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) out.push_back(enhance(f1[i], f2[i]));
    return out;
}

} // namespace freqforge::cfce
