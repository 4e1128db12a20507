#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace freqforge::miloss {

inline constexpr double kSimplexTol = 1e-6;
inline constexpr double kKlSmoothing = 1e-8;

// ---------------------------------------------------------------- divergences

/// D_KL[p || q] in nats for plain probability vectors. Throws InvalidInput off the simplex.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Throws InvalidInput unless every row of probs lies on the simplex.
void check_simplex(const torch::Tensor& probs);

/// Row-wise D_KL[p || q] for (n, k) batches; q is floored at 1e-8 where p > 0 and such rows are renormalized.
torch::Tensor kl_rows(const torch::Tensor& p, const torch::Tensor& q);

/// L_D = exp(-sum_i mean_n D_KL[P_F || P_{F\f_ci}]), in (0, 1].
torch::Tensor decoupling_loss(const torch::Tensor& p_full, const std::array<torch::Tensor, 2>& p_left_out);

/// L_GIA = mean_n D_KL[P_gamma || P_G].
torch::Tensor gia_loss(const torch::Tensor& p_gamma, const torch::Tensor& p_global);

/**
 * Class distribution with one branch slice of the joint feature zeroed and the
 * shared head applied. joint: (n, d1 + d2); branch_index 1 masks [0, d1), 2 masks [d1, d1 + d2).
 */
torch::Tensor leave_one_out_distribution(const torch::Tensor& joint, int branch_index, int64_t first_width,
                                         torch::nn::Linear& head);

// ---------------------------------------------------------------- total loss

enum class Weighting { fixed, uncertainty };

Weighting parse_weighting(const std::string& name);
std::string to_string(Weighting weighting);

/// Learned log-variances s_k = log sigma_k^2 for (CE, D, GIA).
class UncertaintyWeightsImpl : public torch::nn::Module {
public:
    UncertaintyWeightsImpl();
    torch::Tensor log_var;
};
TORCH_MODULE(UncertaintyWeights);

struct LossBundle {
    torch::Tensor l_ce, l_d, l_gia, l_total;
    double ce_weight = 1.0;
    double alpha = 0.0;
    double beta = 0.0;
};

/// Plain-number snapshot of a LossBundle for histories and reports.
struct LossRecord {
    double l_ce = 0, l_d = 0, l_gia = 0, l_total = 0;
    double ce_weight = 1, alpha = 0, beta = 0;
};

LossRecord record(const LossBundle& bundle);

/// L_CE + alpha L_D + beta L_GIA. Throws ConfigError for negative weights.
LossBundle total_loss_fixed(const torch::Tensor& l_ce, const torch::Tensor& l_d, const torch::Tensor& l_gia,
                            double alpha, double beta);

/**
 * sum_k L_k / (2 sigma_k^2) + log(1 + sigma_k^2) over (CE, D, GIA).
 * Reported weights are 1 / (2 sigma_k^2).
 */
LossBundle total_loss_uncertainty(const torch::Tensor& l_ce, const torch::Tensor& l_d, const torch::Tensor& l_gia,
                                  UncertaintyWeights& weights);

// ---------------------------------------------------------------- discrete oracles

/// Joint table p(f1, f2, y) over small finite alphabets, stored row-major.
class DiscreteJoint {
public:
    /// Throws InvalidInput for negative entries, wrong size, alphabets > 8, or total off 1 by more than 1e-12.
    DiscreteJoint(std::array<int, 3> dims, std::vector<double> p);

    static DiscreteJoint random(std::array<int, 3> dims, uint64_t seed);

    const std::array<int, 3>& dims() const noexcept { return dims_; }
    double at(int a, int b, int c) const { return p_[(a * dims_[1] + b) * dims_[2] + c]; }

    /// Marginal over the variables in mask (bit 0 = f1, bit 1 = f2, bit 2 = y), indexed by a full triple.
    double marginal(unsigned mask, int a, int b, int c) const;

    /// Entropy (nats) of the variables in mask.
    double entropy(unsigned mask) const;

private:
    std::array<int, 3> dims_;
    std::vector<double> p_;
};

inline constexpr unsigned kF1 = 1u, kF2 = 2u, kY = 4u;

/// I(A; B | C) by direct summation of p log(p(abc) p(c) / (p(ac) p(bc))). Sets are variable masks.
double conditional_mi(const DiscreteJoint& joint, unsigned a, unsigned b, unsigned c = 0u);

inline double mutual_information(const DiscreteJoint& joint, unsigned a, unsigned b) {
    return conditional_mi(joint, a, b, 0u);
}

/// I(f1; f2; y) from the inclusion-exclusion of entropies (signed).
double interaction_information(const DiscreteJoint& joint);

struct IdentityReport {
    double i_f1_f2 = 0;         // I(f1; f2)
    double i_f1_f2_given_y = 0; // I(f1; f2 | y)
    double interaction = 0;     // I(f1; f2; y)
    double i_y_joint = 0;       // I(y; (f1, f2))
    double i_f1_y_given_f2 = 0;
    double i_f2_y_given_f1 = 0;
    double decomposition_residual = 0; // |I(f1;f2) - I(f1;f2;y) - I(f1;f2|y)|
    double chain_rule_residual = 0;    // |I(y;Fc) - I(f1;y|f2) - I(f2;y|f1) - I(f1;f2;y)|
};

IdentityReport identity_checks(const DiscreteJoint& joint);

} // namespace freqforge::miloss
