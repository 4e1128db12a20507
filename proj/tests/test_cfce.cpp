#include "doctest.h"

#include "freqforge/cfce.hpp"
#include "freqforge/errors.hpp"
#include "test_util.hpp"

using namespace freqforge;
using namespace freqforge::cfce;
using freqforge::testing::max_abs;
using freqforge::testing::random_image;

namespace {

torch::Tensor randn(std::vector<int64_t> shape, uint64_t seed) {
    auto gen = at::detail::createCPUGenerator(seed);
    return torch::randn(shape, gen, torch::kFloat64);
}

// C orthonormal channels on a C-pixel grid: channel i is the i-th standard basis image.
torch::Tensor basis_channels(int64_t c) { return torch::eye(c, torch::kFloat64).view({c, 1, c}); }

torch::Tensor loop_cosine(const torch::Tensor& f1, const torch::Tensor& f2) {
    const int64_t c = f1.size(0);
    auto a = f1.reshape({c, -1}).contiguous(), b = f2.reshape({c, -1}).contiguous();
    auto aa = a.accessor<double, 2>(), bb = b.accessor<double, 2>();
    auto s = torch::zeros({c, c}, torch::kFloat64);
    auto sa = s.accessor<double, 2>();
    for (int64_t i = 0; i < c; ++i)
        for (int64_t j = 0; j < c; ++j) {
            double dot = 0, ni = 0, nj = 0;
            for (int64_t k = 0; k < a.size(1); ++k) {
                dot += aa[i][k] * bb[j][k];
                ni += aa[i][k] * aa[i][k];
                nj += bb[j][k] * bb[j][k];
            }
            sa[i][j] = dot / (std::sqrt(ni) * std::sqrt(nj) + kCosineEps);
        }
    return s;
}

// Reference merge written channel by channel.
torch::Tensor loop_enhance(const torch::Tensor& f1, const torch::Tensor& f2) {
    const int64_t c = f1.size(0);
    auto s = loop_cosine(f1, f2);
    auto out = torch::zeros_like(f1);
    for (int64_t i = 0; i < c; ++i) {
        double z12 = 0, z21 = 0;
        for (int64_t j = 0; j < c; ++j) {
            z12 += std::exp(s[i][j].item<double>());
            z21 += std::exp(s[j][i].item<double>());
        }
        auto acc = 0.5 * (f1[i] + f2[i]);
        for (int64_t j = 0; j < c; ++j) {
            acc = acc + 0.5 * std::exp(s[i][j].item<double>()) / z12 * f2[j];
            acc = acc + 0.5 * std::exp(s[j][i].item<double>()) / z21 * f1[j];
        }
        out[i] = acc;
    }
    return out;
}

} // namespace

TEST_CASE("cosine map") {
    SUBCASE("orthonormal identical channels give identity") {
        auto f = basis_channels(5);
        CHECK(max_abs(cosine_map(f, f) - torch::eye(5, torch::kFloat64)) < 1e-7);
    }
    SUBCASE("negated channels give minus identity") {
        auto f = basis_channels(5);
        CHECK(max_abs(cosine_map(f, -f) + torch::eye(5, torch::kFloat64)) < 1e-7);
    }
    SUBCASE("matches a double-loop oracle") {
        for (uint64_t seed = 0; seed < 5; ++seed) {
            auto f1 = randn({6, 4, 3}, seed), f2 = randn({6, 4, 3}, seed + 100);
            auto s = cosine_map(f1, f2);
            CHECK(max_abs(s - loop_cosine(f1, f2)) < 1e-6);
            CHECK(s.abs().max().item<double>() <= 1.0);
        }
    }
    SUBCASE("zero channel gives a zero row") {
        auto f1 = randn({4, 3, 3}, 1);
        f1[2].zero_();
        auto s = cosine_map(f1, randn({4, 3, 3}, 2));
        CHECK(max_abs(s[2]) == 0.0);
    }
    SUBCASE("batched matches per-sample") {
        auto f1 = randn({3, 4, 2, 2}, 5), f2 = randn({3, 4, 2, 2}, 6);
        auto s = cosine_map(f1, f2);
        for (int i = 0; i < 3; ++i) CHECK(max_abs(s[i] - cosine_map(f1[i], f2[i])) < 1e-14);
    }
    SUBCASE("shape mismatch is rejected") {
        CHECK_THROWS_AS(cosine_map(torch::zeros({4, 2, 2}), torch::zeros({4, 2, 3})), InvalidInput);
        CHECK_THROWS_AS(cosine_map(torch::zeros({4, 4}), torch::zeros({4, 4})), InvalidInput);
    }
}

TEST_CASE("enhance") {
    SUBCASE("identical channels double the input") {
        auto one = randn({1, 3, 3}, 7);
        auto f = one.expand({4, 3, 3}).clone();
        CHECK(max_abs(enhance(f, f) - 2 * f) < 1e-12);
    }
    SUBCASE("zero second branch") {
        auto f1 = randn({4, 3, 3}, 8);
        auto merged = enhance(f1, torch::zeros_like(f1));
        CHECK(max_abs(merged - (0.5 * f1 + 0.5 * f1.mean(0, true))) < 1e-12);
        auto same = randn({1, 3, 3}, 9).expand({4, 3, 3}).clone();
        CHECK(max_abs(enhance(same, torch::zeros_like(same)) - same) < 1e-12);
    }
    SUBCASE("matches the channel-loop reference") {
        for (uint64_t seed = 0; seed < 5; ++seed) {
            auto f1 = randn({5, 3, 2}, 20 + seed), f2 = randn({5, 3, 2}, 40 + seed);
            CHECK(max_abs(enhance(f1, f2) - loop_enhance(f1, f2)) < 1e-6);
        }
    }
    SUBCASE("symmetry") {
        auto f1 = randn({2, 6, 4, 4}, 11), f2 = randn({2, 6, 4, 4}, 12);
        CHECK(max_abs(enhance(f1, f2) - enhance(f2, f1)) < 1e-12);
    }
    SUBCASE("permutation equivariance") {
        auto f1 = randn({6, 4, 4}, 13), f2 = randn({6, 4, 4}, 14);
        auto perm = torch::tensor({3, 0, 5, 1, 4, 2}, torch::kLong);
        auto lhs = enhance(f1.index_select(0, perm), f2.index_select(0, perm));
        CHECK(max_abs(lhs - enhance(f1, f2).index_select(0, perm)) < 1e-12);
    }
    SUBCASE("boundedness") {
        for (uint64_t seed = 0; seed < 20; ++seed) {
            auto f1 = randn({4, 3, 3}, 60 + seed) * 3, f2 = randn({4, 3, 3}, 90 + seed);
            CHECK(max_abs(enhance(f1, f2)) <= max_abs(f1) + max_abs(f2) + 1e-12);
        }
    }
    SUBCASE("stage-wise application") {
        std::vector<torch::Tensor> a{randn({2, 4, 8, 8}, 1), randn({2, 8, 4, 4}, 2)};
        std::vector<torch::Tensor> b{randn({2, 4, 8, 8}, 3), randn({2, 8, 4, 4}, 4)};
        auto out = enhance_stages(a, b);
        REQUIRE(out.size() == 2);
        for (int i = 0; i < 2; ++i) CHECK(torch::equal(out[i], enhance(a[i], b[i])));
        b.pop_back();
        CHECK_THROWS_AS(enhance_stages(a, b), InvalidInput);
    }
}

TEST_CASE("enhance gradient matches finite differences") {
    auto f1 = randn({4, 3, 3}, 31), f2 = randn({4, 3, 3}, 32);
    auto probe = randn({4, 3, 3}, 33);
    auto leaf = f1.clone().requires_grad_(true);
    auto grad = torch::autograd::grad({(enhance(leaf, f2) * probe).sum()}, {leaf})[0].view({-1});
    auto objective = [&]() { return (enhance(f1, f2) * probe).sum().item<double>(); };
    for (int64_t k = 0; k < f1.numel(); ++k) {
        const double fd = testing::central_difference(objective, f1, k, 1e-6);
        CHECK(testing::relative_gap(grad[k].item<double>(), fd) < 1e-4);
    }
}
