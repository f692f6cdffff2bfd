#pragma once

#include <cstdint>
#include <vector>

#include "des/attack.hpp"
#include "des/data.hpp"
#include "des/net.hpp"

// Model evaluation and the two numerical checks that tie the scheduler to
// first-order theory. All accuracy routines chunk the dataset in fixed
// blocks of 256 samples and write per-sample results into disjoint slots, so
// the numbers are identical no matter how many worker threads run (see
// DES_THREADS in parallel.hpp).

namespace des {

/// Fraction of samples whose argmax class (lowest index on ties) matches the
/// label.
double clean_accuracy(const Mlp& net, const Dataset& ds);

/// Accuracy under a PGD attack of radius eps on every sample. Chunk starting
/// at sample b attacks with seed derive(cfg.seed, b), so results do not
/// depend on the chunking's execution order. With eps = 0 this equals
/// clean_accuracy exactly.
double robust_accuracy(const Mlp& net, const Dataset& ds, double eps,
                       const AttackConfig& cfg);

struct SweepPoint {
    double eps = 0.0;
    double robust_acc = 0.0;
};
/// robust_accuracy at each radius with identical attack seeds, so the
/// attacks at different radii share random starts (paired comparison).
std::vector<SweepPoint> eps_sweep(const Mlp& net, const Dataset& ds,
                                  const std::vector<double>& eps_list,
                                  const AttackConfig& cfg);

/// First-order prediction of the worst-case loss increase in an eps-ball:
///   predicted_i = eps * ||grad_x loss_i||_1
///   actual_i    = (exhaustive grid worst loss) - (clean loss)
/// The prediction error |actual - predicted| should shrink like eps^2 as
/// eps -> 0; on a piecewise-linear region actual == predicted to rounding.
struct TaylorCheck {
    double eps = 0.0;
    std::vector<double> actual, predicted;
};
TaylorCheck taylor_check(const Mlp& net, const double* x, std::size_t m,
                         const std::vector<int>& labels, double eps,
                         std::size_t resolution);

/// Risk difference between a fixed budget and per-sample budgets, measured
/// with the exhaustive grid oracle, against the Lipschitz bound
///   |risk_adaptive - risk_fixed| <= lhat * mean_i |eps_i - eps_fixed|
/// where lhat is the largest input-gradient l1 norm observed over both grids
/// of every sample (an empirical Lipschitz constant for eps -> worst loss).
struct RiskGapCheck {
    double risk_fixed = 0.0;
    double risk_adaptive = 0.0;
    double gap = 0.0;                // |risk_adaptive - risk_fixed|
    double lhat = 0.0;               // max l1 input-gradient norm over sampled grids
    double mean_abs_eps_diff = 0.0;  // (1/m) sum |eps_i - eps_fixed|
    double bound = 0.0;              // lhat * mean_abs_eps_diff
    double bound_per_sample = 0.0;   // tighter: (1/m) sum lhat_i |eps_i - eps_fixed|
    bool holds(double rel_slack = 1e-9) const {
        return gap <= bound + rel_slack * (1.0 + bound);
    }
};
RiskGapCheck risk_gap_check(const Mlp& net, const double* x, std::size_t m,
                            const std::vector<int>& labels, double eps_fixed,
                            const std::vector<double>& eps_adaptive,
                            std::size_t resolution);

}  // namespace des
