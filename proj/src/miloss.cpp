#include "freqforge/miloss.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "freqforge/errors.hpp"

namespace freqforge::miloss {

namespace {

void check_batch_pair(const torch::Tensor& p, const torch::Tensor& q) {
    if (p.dim() != 2 || p.sizes() != q.sizes()) {
        throw InvalidInput("distribution batches must both be (n, k) with matching sizes");
    }
}

} // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size() || p.empty()) throw InvalidInput("kl_divergence: size mismatch");
    auto on_simplex = [](std::span<const double> v) {
        double s = 0;
        for (double x : v) {
            if (!std::isfinite(x) || x < -kSimplexTol) return false;
            s += x;
        }
        return std::abs(s - 1.0) <= kSimplexTol;
    };
    if (!on_simplex(p) || !on_simplex(q)) throw InvalidInput("kl_divergence: input off the simplex");

    std::vector<double> qs(q.begin(), q.end());
    bool floored = false;
    for (std::size_t i = 0; i < qs.size(); ++i) {
        if (p[i] > 0 && qs[i] < kKlSmoothing) {
            qs[i] = kKlSmoothing;
            floored = true;
        }
    }
    if (floored) {
        const double total = std::accumulate(qs.begin(), qs.end(), 0.0);
        for (double& x : qs) x /= total;
    }
    double d = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0) d += p[i] * std::log(p[i] / qs[i]);
    }
    return d;
}

void check_simplex(const torch::Tensor& probs) {
    auto t = probs.detach();
    if (t.dim() != 2) throw InvalidInput("distribution batch must be (n, k)");
    if (!torch::isfinite(t).all().item<bool>()) throw InvalidInput("distribution contains NaN/Inf");
    if ((t < -kSimplexTol).any().item<bool>()) throw InvalidInput("distribution has negative entries");
    auto dev = (t.sum(1) - 1.0).abs().max().item<double>();
    if (dev > kSimplexTol) throw InvalidInput("distribution rows do not sum to 1");
}

torch::Tensor kl_rows(const torch::Tensor& p, const torch::Tensor& q) {
    check_batch_pair(p, q);
    check_simplex(p);
    check_simplex(q);
    // Rows that needed no floor are left untouched, so D_KL[p || p] is exactly zero.
    auto floor = (p > 0) & (q < kKlSmoothing);
    auto qs = torch::where(floor, torch::full_like(q, kKlSmoothing), q);
    auto floored_row = floor.any(1, true);
    qs = torch::where(floored_row, qs / qs.sum(1, true), qs);
    return torch::xlogy(p, p / qs.where(p > 0, torch::ones_like(qs))).sum(1);
}

torch::Tensor decoupling_loss(const torch::Tensor& p_full, const std::array<torch::Tensor, 2>& p_left_out) {
    auto total = kl_rows(p_full, p_left_out[0]).mean() + kl_rows(p_full, p_left_out[1]).mean();
    return torch::exp(-total.clamp_min(0.0));
}

torch::Tensor gia_loss(const torch::Tensor& p_gamma, const torch::Tensor& p_global) {
    return kl_rows(p_gamma, p_global).mean();
}

torch::Tensor leave_one_out_distribution(const torch::Tensor& joint, int branch_index, int64_t first_width,
                                         torch::nn::Linear& head) {
    if (branch_index != 1 && branch_index != 2) throw InvalidInput("branch index must be 1 or 2");
    if (joint.dim() != 2 || first_width <= 0 || first_width >= joint.size(1)) {
        throw InvalidInput("joint feature must be (n, d1 + d2) with 0 < d1 < d1 + d2");
    }
    auto keep = torch::ones({joint.size(1)}, joint.options());
    using torch::indexing::Slice;
    if (branch_index == 1) keep.index_put_({Slice(0, first_width)}, 0.0);
    else keep.index_put_({Slice(first_width, torch::indexing::None)}, 0.0);
    return torch::softmax(head->forward(joint * keep), 1);
}

Weighting parse_weighting(const std::string& name) {
    if (name == "fixed") return Weighting::fixed;
    if (name == "uncertainty") return Weighting::uncertainty;
    throw ConfigError("unknown loss weighting '" + name + "' (expected fixed or uncertainty)");
}

std::string to_string(Weighting weighting) { return weighting == Weighting::fixed ? "fixed" : "uncertainty"; }

UncertaintyWeightsImpl::UncertaintyWeightsImpl() { log_var = register_parameter("log_var", torch::zeros({3})); }

LossRecord record(const LossBundle& b) {
    auto v = [](const torch::Tensor& t) { return t.defined() ? t.detach().item<double>() : 0.0; };
    return {v(b.l_ce), v(b.l_d), v(b.l_gia), v(b.l_total), b.ce_weight, b.alpha, b.beta};
}

LossBundle total_loss_fixed(const torch::Tensor& l_ce, const torch::Tensor& l_d, const torch::Tensor& l_gia,
                            double alpha, double beta) {
    if (alpha < 0 || beta < 0) throw ConfigError("loss weights alpha and beta must be non-negative");
    LossBundle b{l_ce, l_d, l_gia, l_ce, 1.0, alpha, beta};
    if (alpha != 0.0) b.l_total = b.l_total + alpha * l_d;
    if (beta != 0.0) b.l_total = b.l_total + beta * l_gia;
    return b;
}

LossBundle total_loss_uncertainty(const torch::Tensor& l_ce, const torch::Tensor& l_d, const torch::Tensor& l_gia,
                                  UncertaintyWeights& weights) {
    const auto& s = weights->log_var;
    auto term = [&](const torch::Tensor& l, int k) {
        auto sk = s[k];
        return 0.5 * l * torch::exp(-sk) + torch::nn::functional::softplus(sk);
    };
    LossBundle b;
    b.l_ce = l_ce;
    b.l_d = l_d;
    b.l_gia = l_gia;
    b.l_total = term(l_ce, 0) + term(l_d, 1) + term(l_gia, 2);
    auto w = (0.5 * torch::exp(-s.detach())).to(torch::kFloat64).contiguous();
    b.ce_weight = w[0].item<double>();
    b.alpha = w[1].item<double>();
    b.beta = w[2].item<double>();
    return b;
}

DiscreteJoint::DiscreteJoint(std::array<int, 3> dims, std::vector<double> p) : dims_(dims), p_(std::move(p)) {
    for (int d : dims_) {
        if (d < 1 || d > 8) throw InvalidInput("alphabet sizes must lie in [1, 8]");
    }
    if (p_.size() != static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2])) {
        throw InvalidInput("joint table size does not match its alphabets");
    }
    double total = 0;
    for (double x : p_) {
        if (!(x >= 0.0)) throw InvalidInput("joint table entries must be non-negative");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("joint table is not normalized");
}

DiscreteJoint DiscreteJoint::random(std::array<int, 3> dims, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]));
    for (double& x : p) x = u(rng);
    double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& x : p) x /= total;
    return DiscreteJoint(dims, std::move(p));
}

double DiscreteJoint::marginal(unsigned mask, int a, int b, int c) const {
    double s = 0;
    for (int i = 0; i < dims_[0]; ++i) {
        if ((mask & kF1) && i != a) continue;
        for (int j = 0; j < dims_[1]; ++j) {
            if ((mask & kF2) && j != b) continue;
            for (int k = 0; k < dims_[2]; ++k) {
                if ((mask & kY) && k != c) continue;
                s += at(i, j, k);
            }
        }
    }
    return s;
}

double DiscreteJoint::entropy(unsigned mask) const {
    // -E[log p_mask], the expectation taken over the full joint.
    double h = 0;
    for (int i = 0; i < dims_[0]; ++i)
        for (int j = 0; j < dims_[1]; ++j)
            for (int k = 0; k < dims_[2]; ++k) {
                const double p = at(i, j, k);
                if (p > 0) h -= p * std::log(marginal(mask, i, j, k));
            }
    return h;
}

double conditional_mi(const DiscreteJoint& joint, unsigned a, unsigned b, unsigned c) {
    if (a == 0 || b == 0 || (a & b) || (a & c) || (b & c)) {
        throw InvalidInput("conditional_mi needs disjoint, non-empty variable sets");
    }
    const auto& d = joint.dims();
    double acc = 0;
    for (int i = 0; i < d[0]; ++i)
        for (int j = 0; j < d[1]; ++j)
            for (int k = 0; k < d[2]; ++k) {
                const double p = joint.at(i, j, k);
                if (p <= 0) continue;
                const double pabc = joint.marginal(a | b | c, i, j, k);
                const double pc = c ? joint.marginal(c, i, j, k) : 1.0;
                const double pac = joint.marginal(a | c, i, j, k);
                const double pbc = joint.marginal(b | c, i, j, k);
                acc += p * std::log(pabc * pc / (pac * pbc));
            }
    return acc;
}

double interaction_information(const DiscreteJoint& joint) {
    return joint.entropy(kF1) + joint.entropy(kF2) + joint.entropy(kY) - joint.entropy(kF1 | kF2) -
           joint.entropy(kF1 | kY) - joint.entropy(kF2 | kY) + joint.entropy(kF1 | kF2 | kY);
}

IdentityReport identity_checks(const DiscreteJoint& joint) {
    IdentityReport r;
    r.i_f1_f2 = mutual_information(joint, kF1, kF2);
    r.i_f1_f2_given_y = conditional_mi(joint, kF1, kF2, kY);
    r.interaction = interaction_information(joint);
    r.i_y_joint = mutual_information(joint, kY, kF1 | kF2);
    r.i_f1_y_given_f2 = conditional_mi(joint, kF1, kY, kF2);
    r.i_f2_y_given_f1 = conditional_mi(joint, kF2, kY, kF1);
    r.decomposition_residual = std::abs(r.i_f1_f2 - r.interaction - r.i_f1_f2_given_y);
    r.chain_rule_residual = std::abs(r.i_y_joint - r.i_f1_y_given_f2 - r.i_f2_y_given_f1 - r.interaction);
    return r;
}

} // namespace freqforge::miloss
