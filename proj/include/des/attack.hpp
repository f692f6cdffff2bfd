#pragma once

#include <cstdint>
#include <vector>

#include "des/net.hpp"

// L-infinity attacks with a per-sample radius. Every routine takes one eps
// value per sample so scheduled budgets thread through unchanged; a fixed-eps
// attack is just a constant vector. Iterates are always projected back into
// the per-sample ball around the original input and then into the optional
// data box.

namespace des {

struct AttackConfig {
    std::size_t steps = 10;
    double step_size = 0.25;   // absolute step, or fraction of eps when step_relative
    bool step_relative = true;
    bool random_start = true;  // start from a uniform point in the eps-ball
    bool has_box = false;      // clamp iterates into [box_lo, box_hi]
    double box_lo = 0.0;
    double box_hi = 1.0;
    std::uint64_t seed = 0;    // random starts; sample i draws from derive(seed, i)

    void validate() const;
};

/// Projected gradient descent on the per-sample cross-entropy loss:
///   x_{t+1} = clamp_ball(x_t + step_i * sign(grad_i), x0_i, eps_i), then box.
/// With random_start the start point is x0 + eps_i * u, u uniform in
/// [-1,1]^d from derive(cfg.seed, i) — the same u for every eps, so attacks
/// at different radii are paired. With eps_i = 0 the output row equals the
/// input row exactly. first_grad, if non-null (m x d), replaces the first
/// gradient evaluation; it is only honored when random_start is off, since
/// a gradient at x0 does not apply at a random start point.
std::vector<double> pgd(const Mlp& net, const double* x, std::size_t m,
                        const std::vector<int>& labels, const std::vector<double>& eps,
                        const AttackConfig& cfg, const double* first_grad = nullptr);

/// Single signed-gradient step of size eps_i, no random start.
std::vector<double> fgsm(const Mlp& net, const double* x, std::size_t m,
                         const std::vector<int>& labels, const std::vector<double>& eps,
                         bool has_box = false, double box_lo = 0.0, double box_hi = 1.0);

/// Exhaustive worst case over an axis-aligned grid of the eps_i-ball:
/// resolution points per axis (odd, >= 3, so the clean point and the ball
/// surface are both on the grid), input dimension at most 3. Ties pick the
/// first point in grid order.
struct GridOracleResult {
    std::vector<double> x_worst;     // m x d
    std::vector<double> loss_worst;  // m
};
GridOracleResult grid_oracle(const Mlp& net, const double* x, std::size_t m,
                             const std::vector<int>& labels, const std::vector<double>& eps,
                             std::size_t resolution, bool has_box = false,
                             double box_lo = 0.0, double box_hi = 1.0);

}  // namespace des
