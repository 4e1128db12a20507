#include "doctest.h"

#include "freqforge/backbone.hpp"
#include "freqforge/errors.hpp"
#include "test_util.hpp"

using namespace freqforge;
using namespace freqforge::backbone;
using freqforge::testing::random_image;

TEST_CASE("tiny profile stage shapes at 64x64") {
    auto enc = make_encoder(BackboneConfig::tiny(), 1);
    auto feats = enc->forward(random_image({2, 3, 64, 64}, 1, torch::kFloat32));
    REQUIRE(feats.size() == 7);
    const std::array<int64_t, 7> side{32, 16, 8, 4, 2, 2, 2};
    const std::array<int64_t, 7> ch{8, 16, 32, 64, 64, 128, 128};
    for (int i = 0; i < 7; ++i) {
        CHECK(feats[i].size(0) == 2);
        CHECK(feats[i].size(1) == ch[i]);
        CHECK(feats[i].size(2) == side[i]);
        CHECK(feats[i].size(3) == side[i]);
    }
    CHECK_NOTHROW(feats.validate());
}

TEST_CASE("stage sizes are non-increasing for assorted inputs") {
    auto enc = make_encoder(BackboneConfig::tiny(), 2);
    enc->eval();
    for (auto [h, w] : {std::pair<int64_t, int64_t>{32, 32}, {40, 72}, {96, 48}}) {
        auto feats = enc->forward(random_image({1, 3, h, w}, 3, torch::kFloat32));
        for (std::size_t i = 1; i < feats.size(); ++i) {
            CHECK(feats[i].size(2) <= feats[i - 1].size(2));
            CHECK(feats[i].size(3) <= feats[i - 1].size(3));
        }
        CHECK(feats[6].size(2) >= 1);
    }
}

TEST_CASE("zero image gives zero stages") {
    auto enc = make_encoder(BackboneConfig::tiny(), 3);
    auto z = torch::zeros({2, 3, 64, 64});
    for (bool train : {true, false}) {
        enc->train(train);
        auto feats = enc->forward(z);
        for (const auto& s : feats.stages) CHECK(s.abs().max().item<double>() == 0.0);
    }
}

TEST_CASE("forward is deterministic") {
    auto x = random_image({2, 3, 64, 64}, 4, torch::kFloat32);
    auto a = make_encoder(BackboneConfig::tiny(), 5);
    auto b = make_encoder(BackboneConfig::tiny(), 5);
    a->eval();
    b->eval();
    auto fa = a->forward(x), fb = b->forward(x);
    for (int i = 0; i < 7; ++i) CHECK(torch::equal(fa[i], fb[i]));
}

TEST_CASE("init_params") {
    auto a = make_encoder(BackboneConfig::tiny(), 11);
    auto b = make_encoder(BackboneConfig::tiny(), 11);
    auto c = make_encoder(BackboneConfig::tiny(), 12);
    auto pa = a->parameters(), pb = b->parameters(), pc = c->parameters();
    REQUIRE(pa.size() == pb.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(torch::equal(pa[i], pb[i]));
        if (!torch::equal(pa[i], pc[i])) any_diff = true;
    }
    CHECK(any_diff);

    SUBCASE("weights respect the fan-in bound") {
        for (auto& item : a->named_parameters()) {
            const auto& p = item.value();
            if (p.dim() < 2) continue;
            // bound = sqrt(6 / (in_channels/groups * kh * kw))
            const double fan_in = static_cast<double>(p.size(1) * p.size(2) * p.size(3));
            const double bound = std::sqrt(6.0 / fan_in);
            CHECK(init_bound(p) == doctest::Approx(bound));
            CHECK(p.abs().max().item<double>() <= bound);
            CHECK(p.abs().max().item<double>() > 0.5 * bound);
        }
    }
    SUBCASE("norm scales are one and shifts are zero") {
        for (auto& item : a->named_parameters()) {
            const auto& p = item.value();
            if (p.dim() != 1) continue;
            const double target = item.key().ends_with("weight") ? 1.0 : 0.0;
            CHECK(torch::all(p == target).item<bool>());
        }
    }
}

TEST_CASE("undersized input is rejected") {
    auto enc = make_encoder(BackboneConfig::tiny(), 1);
    CHECK_THROWS_AS(enc->forward(torch::zeros({1, 3, 31, 64})), InvalidInput);
    CHECK_THROWS_AS(enc->forward(torch::zeros({1, 3, 64, 16})), InvalidInput);
}

TEST_CASE("configuration validation") {
    auto bad = BackboneConfig::tiny();
    bad.channels[3] = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    auto altered = BackboneConfig::tiny();
    altered.channels[6] = 256;
    CHECK_THROWS_AS(Encoder{altered}, ConfigError);
    CHECK(parse_profile("full") == Profile::full);
    CHECK(to_string(parse_profile("tiny")) == "tiny");
    CHECK_THROWS_AS(parse_profile("huge"), ConfigError);
}

TEST_CASE("full profile builds separable stages") {
    Encoder enc(BackboneConfig::full());
    int64_t params = 0;
    for (const auto& p : enc->parameters()) params += p.numel();
    CHECK(params > 1'000'000);
    bool has_depthwise = false;
    for (auto& item : enc->named_parameters()) {
        const auto& p = item.value();
        if (p.dim() == 4 && p.size(1) == 1 && p.size(2) == 3) has_depthwise = true;
    }
    CHECK(has_depthwise);
}

TEST_CASE("every parameter receives gradient") {
    auto enc = make_encoder(BackboneConfig::tiny(), 21);
    enc->train();
    auto x = random_image({4, 3, 64, 64}, 22, torch::kFloat32);
    auto gen = at::detail::createCPUGenerator(23);
    auto feats = enc->forward(x);
    // A random linear readout of the last stage touches every channel.
    auto probe = torch::randn(feats[6].sizes(), gen);
    (feats[6] * probe).sum().backward();
    for (auto& item : enc->named_parameters()) {
        INFO(item.key());
        REQUIRE(item.value().grad().defined());
        CHECK(item.value().grad().abs().sum().item<double>() > 0.0);
    }
}
