#include "doctest.h"

#include <random>

#include "freqforge/dfcs.hpp"
#include "freqforge/errors.hpp"
#include "test_util.hpp"

using namespace freqforge;
using namespace freqforge::dfcs;
using freqforge::testing::max_abs;
using freqforge::testing::random_image;

namespace {

RowColumnAttention make_attention(AttentionOptions opts, uint64_t seed, torch::Dtype dtype = torch::kFloat64) {
    RowColumnAttention att(opts);
    auto gen = at::detail::createCPUGenerator(seed);
    torch::NoGradGuard ng;
    for (auto& p : att->parameters()) p.uniform_(-0.5, 0.5, gen);
    att->to(dtype);
    return att;
}

// Second implementation of A_rc for one pooled 8x8 map, written with explicit loops.
std::vector<double> reference_arc(const std::vector<double>& g, const torch::Tensor& w_in, const torch::Tensor& w_out,
                                  bool rectify) {
    std::array<double, 8> row{}, col{};
    double total = 0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            row[i] += g[i * 8 + j];
            col[j] += g[i * 8 + j];
            total += g[i * 8 + j];
        }
    std::vector<double> m(64);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) m[i * 8 + j] = total > 0 ? row[i] * col[j] / total : 0.0;
    auto wi = w_in.to(torch::kFloat64).contiguous();
    auto wo = w_out.to(torch::kFloat64).contiguous();
    const int64_t hidden = wi.size(0);
    std::vector<double> h(hidden, 0.0), out(64, 0.0);
    for (int64_t k = 0; k < hidden; ++k) {
        for (int b = 0; b < 64; ++b) h[k] += wi[k][b].item<double>() * m[b];
        if (rectify) h[k] = std::max(0.0, h[k]);
    }
    for (int b = 0; b < 64; ++b)
        for (int64_t k = 0; k < hidden; ++k) out[b] += wo[b][k].item<double>() * h[k];
    return out;
}

std::vector<double> to_vec(const torch::Tensor& t) {
    auto c = t.to(torch::kFloat64).contiguous();
    return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

} // namespace

TEST_CASE("pooled spectrum") {
    SUBCASE("constant image pools to DC only") {
        auto f = freq::block_dct(freq::Image(torch::full({3, 16, 16}, 0.5, torch::kFloat64)));
        auto g = pooled_spectrum(f);
        CHECK(g[0].item<double>() == doctest::Approx(4.0));
        CHECK(max_abs(g.narrow(0, 1, 63)) < 1e-12);
    }
    SUBCASE("homogeneous under positive scaling") {
        auto f = freq::FrequencyTensor(random_image({3, 64, 3, 2}, 4) - 0.5);
        auto g = pooled_spectrum(f);
        auto gs = pooled_spectrum(freq::FrequencyTensor(f.coeffs() * 2.5));
        CHECK(max_abs(gs - 2.5 * g) < 1e-12);
    }
    SUBCASE("matches a brute-force mean of magnitudes") {
        auto c = random_image({3, 64, 3, 2}, 8) - 0.5;
        auto g = pooled_spectrum(freq::FrequencyTensor(c));
        auto acc = c.accessor<double, 4>();
        for (int b = 0; b < 64; ++b) {
            double s = 0;
            for (int ch = 0; ch < 3; ++ch)
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 2; ++j) s += std::abs(acc[ch][b][i][j]);
            s /= 18.0;
            CHECK(std::abs(g[b].item<double>() - s) / s < 1e-7);
        }
    }
}

TEST_CASE("row-column attention") {
    SUBCASE("zero map gives zero attention") {
        auto att = make_attention({}, 1);
        CHECK(max_abs(row_column_attention(torch::zeros({8, 8}, torch::kFloat64), att)) == 0.0);
    }
    SUBCASE("identity psi returns the normalized separable interaction") {
        AttentionOptions opts;
        opts.hidden = 64;
        RowColumnAttention att(opts);
        att->to(torch::kFloat64);
        {
            torch::NoGradGuard ng;
            att->mix_in()->weight.copy_(torch::eye(64, torch::kFloat64));
            att->mix_out()->weight.copy_(torch::eye(64, torch::kFloat64));
        }
        auto g = random_image({8, 8}, 3);
        auto arc = row_column_attention(g, att);
        auto row = g.sum(1, true), col = g.sum(0, true);
        CHECK(max_abs(arc - row.mm(col) / g.sum()) < 1e-12);
        // rank one
        auto sv = torch::linalg_svdvals(arc);
        CHECK(sv[1].item<double>() < 1e-10 * sv[0].item<double>());
    }
    SUBCASE("matches the loop reference for random maps and params") {
        for (uint64_t seed = 0; seed < 5; ++seed) {
            auto att = make_attention({}, 10 + seed);
            auto g = random_image({64}, 20 + seed);
            auto got = to_vec(row_column_attention(g, att));
            auto ref = reference_arc(to_vec(g), att->mix_in()->weight, att->mix_out()->weight, true);
            for (int b = 0; b < 64; ++b) CHECK(std::abs(got[b] - ref[b]) < 1e-6);
        }
    }
    SUBCASE("alpha outside [0, 1] is a configuration error") {
        AttentionOptions opts;
        opts.alpha_rc = 1.5;
        CHECK_THROWS_AS(RowColumnAttention{opts}, ConfigError);
    }
}

TEST_CASE("fused attention and selection") {
    auto img = freq::Image(random_image({3, 32, 32}, 5));
    auto f = freq::block_dct(img);

    SUBCASE("alpha = 0 reduces to the pooled spectrum") {
        AttentionOptions opts;
        opts.alpha_rc = 0.0;
        auto att = make_attention(opts, 2);
        auto imp = fused_attention(f, att, 8);
        auto g = to_vec(pooled_spectrum(f));
        CHECK(imp.scores == g);
    }
    SUBCASE("K = 8 is the default") { CHECK(kDefaultK == 8); }
    SUBCASE("2K > 64 is rejected") {
        auto att = make_attention({}, 2);
        CHECK_THROWS_AS(fused_attention(f, att, 33), ConfigError);
        CHECK_THROWS_AS(fused_attention(f, att, 0), ConfigError);
    }
    SUBCASE("equal scores fall back to zigzag order") {
        std::vector<double> flat(64, 1.25);
        auto [p, s] = select_channels(flat, 8);
        const auto& z = freq::zigzag_order();
        CHECK(p.indices() == std::vector<int>(z.begin(), z.begin() + 8));
        CHECK(s.indices() == std::vector<int>(z.begin() + 8, z.begin() + 16));
    }
    SUBCASE("importance map is the row-major reshape") {
        auto att = make_attention({}, 3);
        auto imp = fused_attention(f, att, 8);
        auto m = imp.map8x8();
        CHECK(m[2][5].item<double>() == imp.scores[21]);
    }
}

TEST_CASE("selection invariants over random scores") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> level(0, 6); // coarse levels force plenty of ties
    const auto& rank = freq::zigzag_rank();
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> scores(64);
        for (auto& s : scores) s = level(rng) * 0.5;
        for (int k : {1, 2, 4, 6, 8, 16, 32}) {
            auto [p, s] = select_channels(scores, k);
            REQUIRE(p.size() == static_cast<std::size_t>(k));
            REQUIRE(s.size() == static_cast<std::size_t>(k));
            for (int a : p.indices()) {
                CHECK_FALSE(s.contains(a));
                for (int b : s.indices()) {
                    const bool ordered = scores[a] > scores[b] || (scores[a] == scores[b] && rank[a] < rank[b]);
                    CHECK(ordered);
                }
            }
        }
    }
}

TEST_CASE("branch inputs") {
    auto x = random_image({2, 3, 32, 32}, 6, torch::kFloat64);
    auto att = make_attention({}, 7);
    // With a zero output map the scores are the pooled spectrum and every kept band has unit weight.
    auto unit = make_attention({}, 7);
    {
        torch::NoGradGuard ng;
        unit->mix_out()->weight.zero_();
    }

    SUBCASE("shapes match the input") {
        auto bi = make_branch_inputs(freq::Image(x), att, 8);
        CHECK(bi.rgb.sizes() == x.sizes());
        CHECK(bi.primary.sizes() == x.sizes());
        CHECK(bi.secondary.sizes() == x.sizes());
        CHECK(bi.importance.size() == 2);
    }
    SUBCASE("K = 32 halves add up to the full inverse") {
        auto bi = make_branch_inputs(freq::Image(x), unit, 32);
        CHECK(max_abs(bi.primary + bi.secondary - x) < 1e-12);
    }
    SUBCASE("constant image is reproduced by the primary branch") {
        auto c = torch::full({1, 3, 32, 32}, 0.6, torch::kFloat64);
        auto bi = make_branch_inputs(freq::Image(c), unit, 8);
        CHECK(bi.importance[0].primary.contains(0));
        CHECK(max_abs(bi.primary - c) < 1e-12);
    }
    SUBCASE("unpadded sizes are padded and cropped back") {
        auto odd = random_image({1, 3, 36, 44}, 9);
        auto bi = make_branch_inputs(freq::Image(odd), unit, 32);
        CHECK(bi.primary.sizes() == odd.sizes());
        // with all 64 bands split across the two branches the padded inverse is exact
        CHECK(max_abs(bi.primary + bi.secondary - odd) < 1e-12);
    }
    SUBCASE("selection is deterministic") {
        auto a = make_branch_inputs(freq::Image(x), att, 8);
        auto b = make_branch_inputs(freq::Image(x), att, 8);
        for (std::size_t i = 0; i < a.importance.size(); ++i) {
            CHECK(a.importance[i].primary == b.importance[i].primary);
            CHECK(a.importance[i].secondary == b.importance[i].secondary);
        }
        CHECK(torch::equal(a.primary, b.primary));
    }
}

TEST_CASE("selected sets are invariant to coefficient scaling with a homogeneous psi") {
    AttentionOptions opts;
    opts.linear_activation = true;
    auto att = make_attention(opts, 11);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto x = random_image({3, 32, 32}, 100 + seed);
        auto f = freq::block_dct(freq::Image(x));
        auto base = fused_attention(f, att, 8);
        for (double s : {0.1, 3.0, 17.0}) {
            auto scaled = fused_attention(freq::FrequencyTensor(f.coeffs() * s), att, 8);
            CHECK(scaled.primary == base.primary);
            CHECK(scaled.secondary == base.secondary);
        }
    }
}

TEST_CASE("primary reconstruction is differentiable exactly in the kept scores") {
    auto x = random_image({1, 3, 16, 16}, 12);
    auto image = freq::Image(x);
    auto f = freq::block_dct(image);
    auto att = make_attention({}, 13);
    auto base = fused_scores(f, att).detach().clone();
    auto probe = random_image({1, 3, 16, 16}, 14) - 0.5;
    const int k = 8;
    auto primary = branch_inputs_from_scores(image, f, base, k).importance[0].primary;

    auto leaf = base.clone().requires_grad_(true);
    auto out = branch_inputs_from_scores(image, f, leaf, k);
    auto grad = torch::autograd::grad({(out.primary * probe).sum()}, {leaf})[0];

    auto scores = base.clone();
    auto objective = [&]() {
        auto bi = branch_inputs_from_scores(image, f, scores, k);
        REQUIRE(bi.importance[0].primary == primary);
        return (bi.primary * probe).sum().item<double>();
    };
    for (int b = 0; b < 64; ++b) {
        const double fd = testing::central_difference(objective, scores, b, 1e-6);
        const double an = grad.view({-1})[b].item<double>();
        if (primary.contains(b)) {
            CHECK(std::abs(an) > 1e-8);
            CHECK(testing::relative_gap(an, fd) < 1e-4);
        } else {
            CHECK(an == 0.0);
            CHECK(fd == 0.0);
        }
    }
}

TEST_CASE("band weights are the fused scores relative to the pooled spectrum") {
    auto x = random_image({2, 3, 16, 16}, 15);
    auto image = freq::Image(x);
    auto f = freq::block_dct(image);
    auto att = make_attention({}, 16);
    auto scores = fused_scores(f, att).detach();
    auto bi = branch_inputs_from_scores(image, f, scores, 8);
    auto w = scores / pooled_spectrum(f);
    auto expected = freq::reconstruct_masked(f, bi.primary_mask, w).pixels();
    CHECK(max_abs(bi.primary - expected) < 1e-12);
}
