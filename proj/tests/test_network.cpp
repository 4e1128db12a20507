#include "doctest.h"

#include <algorithm>

#include "freqforge/errors.hpp"
#include "freqforge/network.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace freqforge;
using namespace freqforge::network;
using freqforge::testing::random_image;

namespace {

NetworkConfig config_for(Variant v) {
    NetworkConfig c;
    c.variant = v;
    return c;
}

bool has(const std::vector<std::string>& names, const std::string& n) {
    return std::find(names.begin(), names.end(), n) != names.end();
}

torch::Tensor labels(int64_t n) { return torch::arange(n, torch::kLong).remainder(2); }

} // namespace

TEST_CASE("variant table") {
    const auto& v = ablation_variants();
    REQUIRE(v.size() == 5);
    CHECK(display_name(v[0]) == "RGB");
    CHECK(display_name(v[1]) == "Frequency Branch");
    CHECK(display_name(v[2]) == "Triple Branches");
    CHECK(display_name(v[3]) == "Triple Branches+CFCE");
    CHECK(display_name(v[4]) == "Triple Stream Network");
    for (auto x : v) CHECK(parse_variant(key(x)) == x);
    CHECK_THROWS_AS(parse_variant("quad"), ConfigError);
}

TEST_CASE("parameter census per variant") {
    auto rgb = make_network(config_for(Variant::rgb_only), 1)->census();
    CHECK(has(rgb, "rgb_encoder"));
    CHECK_FALSE(has(rgb, "primary_encoder"));
    CHECK_FALSE(has(rgb, "secondary_encoder"));
    CHECK_FALSE(has(rgb, "attention"));
    CHECK_FALSE(has(rgb, "loss_weights"));

    auto freq_only = make_network(config_for(Variant::frequency_only), 1)->census();
    CHECK_FALSE(has(freq_only, "rgb_encoder"));
    CHECK(has(freq_only, "primary_encoder"));
    CHECK(has(freq_only, "secondary_encoder"));

    auto full = make_network(config_for(Variant::full), 1)->census();
    for (const char* n : {"attention", "rgb_encoder", "primary_encoder", "secondary_encoder", "fusion", "heads", "loss_weights"})
        CHECK(has(full, n));

    auto fixed = config_for(Variant::full);
    fixed.weighting = miloss::Weighting::fixed;
    CHECK_FALSE(has(make_network(fixed, 1)->census(), "loss_weights"));

    auto shared = config_for(Variant::full);
    shared.backbone.share_frequency_weights = true;
    CHECK_FALSE(has(make_network(shared, 1)->census(), "secondary_encoder"));
}

TEST_CASE("forward shapes for every variant") {
    auto x = random_image({2, 3, 64, 64}, 3, torch::kFloat32);
    for (auto v : ablation_variants()) {
        INFO(key(v));
        auto net = make_network(config_for(v), 2);
        auto out = net->forward(x);
        CHECK(out.fused.gamma.sizes() == torch::IntArrayRef{2, 128, 2, 2});
        CHECK(out.fused.global.sizes() == torch::IntArrayRef{2, 64});
        CHECK(out.predictions.logits.sizes() == torch::IntArrayRef{2, 2});
        CHECK(out.predictions.p_full.defined() == (v == Variant::full));
        CHECK(out.branch_inputs.has_value() == (v != Variant::rgb_only));
    }
}

TEST_CASE("loss bundles per variant") {
    auto x = random_image({4, 3, 64, 64}, 4, torch::kFloat32);
    auto y = labels(4);
    SUBCASE("full variant carries decoupling and alignment terms") {
        auto net = make_network(config_for(Variant::full), 5);
        auto b = net->losses(net->forward(x), y);
        const auto r = miloss::record(b);
        CHECK(r.l_d > 0.0);
        CHECK(r.l_d <= 1.0);
        CHECK(r.l_gia > 0.0);
        CHECK(r.l_ce > 0.0);
        CHECK(std::isfinite(r.l_total));
        CHECK(r.alpha == doctest::Approx(0.5));
        CHECK(r.beta == doctest::Approx(0.5));
    }
    SUBCASE("other variants only carry cross entropy") {
        for (auto v : {Variant::rgb_only, Variant::frequency_only, Variant::triple_sum, Variant::triple_cfce}) {
            auto net = make_network(config_for(v), 5);
            const auto r = miloss::record(net->losses(net->forward(x), y));
            CHECK(r.l_d == 0.0);
            CHECK(r.l_gia == 0.0);
            CHECK(r.l_total == r.l_ce);
        }
    }
    SUBCASE("fixed weighting uses alpha and beta") {
        auto c = config_for(Variant::full);
        c.weighting = miloss::Weighting::fixed;
        c.alpha = 0.25;
        c.beta = 2.0;
        auto net = make_network(c, 5);
        const auto r = miloss::record(net->losses(net->forward(x), y));
        CHECK(r.l_total == doctest::Approx(r.l_ce + 0.25 * r.l_d + 2.0 * r.l_gia).epsilon(1e-6));
    }
}

TEST_CASE("network construction is seeded") {
    auto x = random_image({2, 3, 64, 64}, 6, torch::kFloat32);
    auto a = make_network(config_for(Variant::full), 9), b = make_network(config_for(Variant::full), 9);
    a->eval();
    b->eval();
    CHECK(torch::equal(a->forward(x).predictions.logits, b->forward(x).predictions.logits));
    auto c = make_network(config_for(Variant::full), 10);
    c->eval();
    CHECK_FALSE(torch::equal(a->forward(x).predictions.logits, c->forward(x).predictions.logits));
}

TEST_CASE("fresh networks start with a zero attention output map") {
    auto net = make_network(config_for(Variant::full), 3);
    CHECK(net->attention->mix_out()->weight.abs().max().item<double>() == 0.0);
    CHECK(net->attention->mix_in()->weight.abs().max().item<double>() > 0.0);
}

TEST_CASE("total loss reaches every parameter") {
    auto net = make_network(config_for(Variant::full), 11);
    {
        // after the first update the attention output map is no longer zero
        torch::NoGradGuard ng;
        net->attention->mix_out()->weight.fill_(0.01);
    }
    auto x = random_image({4, 3, 64, 64}, 12, torch::kFloat32);
    net->losses(net->forward(x), labels(4)).l_total.backward();
    for (const auto& item : net->named_parameters()) {
        INFO(item.key());
        REQUIRE(item.value().grad().defined());
        CHECK(item.value().grad().abs().sum().item<double>() > 0.0);
    }
}

TEST_CASE("gradients match central differences in every module") {
    auto net = make_network(config_for(Variant::full), 13);
    net->to(torch::kFloat64);
    {
        torch::NoGradGuard ng;
        // move the loss log-variances off zero so their gradients are generic
        net->loss_weights->log_var.copy_(torch::tensor({0.3, -0.2, 0.1}, torch::kFloat64));
        // and give the attention output map a small nonzero value so both of its layers carry gradient
        auto gen = at::detail::createCPUGenerator(15);
        net->attention->mix_out()->weight.uniform_(-0.05, 0.05, gen);
    }
    auto x = random_image({4, 3, 64, 64}, 14);
    auto y = labels(4);
    for (auto o : {testing::Objective::decoupling, testing::Objective::gia, testing::Objective::total}) {
        auto probes = testing::gradient_probes(net, x, y, o);
        std::vector<std::string> modules;
        for (const auto& p : probes) {
            INFO(testing::objective_name(o) << " " << p.module << "." << p.parameter << "[" << p.index << "] analytic "
                                            << p.analytic << " numeric " << p.numeric);
            CHECK(p.gap < 1e-4);
            modules.push_back(p.module);
        }
        CHECK(has(modules, "attention"));
        CHECK(has(modules, "primary_encoder"));
        CHECK(has(modules, "secondary_encoder"));
        CHECK(has(modules, "rgb_encoder"));
        // the joint feature is read from the encoder tops, so L_D does not involve the fusion module
        CHECK(has(modules, "fusion") == (o != testing::Objective::decoupling));
        CHECK(has(modules, "heads"));
        if (o == testing::Objective::total) CHECK(has(modules, "loss_weights"));
    }
}

TEST_CASE("configuration errors") {
    auto c = config_for(Variant::full);
    c.k = 40;
    CHECK_THROWS_AS(TripleStreamNet{c}, ConfigError);
    c.k = 8;
    c.alpha = -1;
    CHECK_THROWS_AS(TripleStreamNet{c}, ConfigError);
    auto net = make_network(config_for(Variant::rgb_only), 1);
    CHECK_THROWS_AS(net->forward(torch::zeros({3, 64, 64})), InvalidInput);
}
