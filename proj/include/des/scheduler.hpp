#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "des/net.hpp"

// Per-sample perturbation budgets. For each sample the scheduler measures
// three difficulty signals — input-gradient norm, softmax entropy, and
// MC-dropout uncertainty — min-max normalizes each within the batch, fuses
// them with convex weights into a difficulty score sigma in [0,1], and maps
// sigma affinely to a budget eps = eps_min + lambda * sigma. Everything is
// recomputed per batch, so budgets track the current model.

namespace des {

struct ScheduleConfig {
    double eps_min = 0.05;   // budget floor
    double lambda = 0.2;     // budget range; eps stays in [eps_min, eps_min+lambda]
    double alpha = 1.0 / 3;  // weight of the gradient-norm signal
    double beta = 1.0 / 3;   // weight of the entropy signal
    double gamma = 1.0 / 3;  // weight of the mc-dropout signal
    std::size_t mc_passes = 3;

    /// Throws std::invalid_argument unless eps_min >= 0, lambda >= 0, all
    /// weights >= 0 and alpha+beta+gamma == 1 within 1e-9, mc_passes >= 1.
    void validate() const;
};

/// Raw signals, their normalized forms, and the fused outputs for one batch.
struct FactorScores {
    std::vector<double> g, h, u;                 // raw signals
    std::vector<double> g_norm, h_norm, u_norm;  // batch min-max normalized
    std::vector<double> sigma;                   // fused difficulty, in [0,1]
    std::vector<double> eps;                     // per-sample budgets
};

/// L2 norm of each row of an m x d gradient matrix.
std::vector<double> gradient_row_norms(const std::vector<double>& grad_x, std::size_t m,
                                       std::size_t d);

/// Shannon entropy -sum_k p ln p per row, with 0 ln 0 = 0. Rows must be
/// valid distributions: entries >= 0 and row sum within 1e-9 of 1, else
/// std::domain_error.
std::vector<double> softmax_entropy(const std::vector<double>& probs, std::size_t m,
                                    std::size_t k);

/// Mean over classes of the population variance across passes of each class
/// probability: u_i = (1/k) sum_k (1/T) sum_t (p_t - pbar)^2, evaluated in
/// the cancellation-free pairwise form so bitwise-identical passes give
/// exactly zero.
std::vector<double> mc_uncertainty(const std::vector<std::vector<double>>& pass_probs,
                                   std::size_t m, std::size_t k);

/// (v - min) / (max - min); if max - min < 1e-12 the batch carries no signal
/// and every entry maps to 0.5.
std::vector<double> minmax_normalize(const std::vector<double>& v);

/// sigma_i = alpha*g + beta*h + gamma*u, clamped to [0,1] to absorb rounding.
std::vector<double> fuse_difficulty(const std::vector<double>& g_norm,
                                    const std::vector<double>& h_norm,
                                    const std::vector<double>& u_norm, double alpha,
                                    double beta, double gamma);

/// eps_i = eps_min + lambda * sigma_i. Throws std::domain_error if any sigma
/// falls outside [0,1].
std::vector<double> epsilon_budget(const std::vector<double>& sigma, double eps_min,
                                   double lambda);

struct ScheduleResult {
    FactorScores scores;
    std::vector<double> grad_x;  // per-sample input-loss gradients, m x d
    std::vector<double> probs;   // deterministic-pass probabilities, m x k
    double mean_loss = 0.0;
};

/// Full pipeline on one batch. The deterministic forward supplies the
/// gradient and entropy signals; mc_passes stochastic passes seeded from
/// mc_seed supply the uncertainty signal.
ScheduleResult compute_schedule(const Mlp& net, const double* x, std::size_t m,
                                const std::vector<int>& labels, const ScheduleConfig& cfg,
                                std::uint64_t mc_seed);

/// CSV with header
/// sample_index,g,h,u,g_norm,h_norm,u_norm,sigma,eps
void write_factor_csv(std::ostream& os, const FactorScores& s);

}  // namespace des
