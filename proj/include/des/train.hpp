#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

#include "des/attack.hpp"
#include "des/data.hpp"
#include "des/eval.hpp"
#include "des/net.hpp"
#include "des/scheduler.hpp"

// Adversarial training. Each step attacks the current batch inside
// per-sample budgets — either scheduled from the difficulty signals or one
// fixed radius — and updates on the adversarial loss with SGD + momentum.
// Both modes consume bit-identical randomness for everything except the
// schedule's own MC passes, so a scheduled run with lambda = 0 and a fixed
// run at eps = eps_min produce bit-identical weights.

namespace des {

enum class TrainMode { Scheduled, FixedEps };

struct OptimConfig {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double lr_decay = 0.1;  // multiplier at floor(0.75*epochs) and floor(0.9*epochs)

    void validate() const;
};

struct TrainOptions {
    TrainMode mode = TrainMode::Scheduled;
    double fixed_eps = 0.1;   // FixedEps budget
    ScheduleConfig schedule;  // Scheduled budgets
    AttackConfig attack;      // inner training attack (seed field is ignored;
                              // the trainer derives one per step)
    std::size_t probe_steps = 10;  // per-epoch robustness probe attack
    double probe_eps = 0.1;        // probe radius
    std::uint64_t seed = 0;

    std::ostream* metrics_csv = nullptr;  // per-epoch rows
    std::ostream* log = nullptr;          // human-readable progress
    // Scheduled mode: sink for the first batch's factor scores each epoch.
    std::function<std::unique_ptr<std::ostream>(std::size_t epoch)> factor_sink;
};

/// Loss became non-finite; carries where.
struct TrainAbort : std::runtime_error {
    TrainAbort(std::size_t epoch, std::size_t step, const std::string& what)
        : std::runtime_error(what), epoch(epoch), step(step) {}
    std::size_t epoch, step;
};

struct EpochRow {
    std::size_t epoch = 0;
    double clean_acc = 0.0;
    double robust_acc = 0.0;  // probe PGD at probe_eps
    double mean_eps = 0.0, min_eps = 0.0, max_eps = 0.0;
    double train_loss = 0.0;  // sample-weighted mean adversarial loss
};

/// Invariant telemetry aggregated over every training step.
struct RunStats {
    double max_ball_gap = -1e308;       // max over steps of max_i,j (|adv-x| - eps_i)
    double max_param_grad_norm = 0.0;   // largest parameter-gradient l2 norm
    double eps_min = 1e308, eps_max = -1e308;
    double sigma_min = 1e308, sigma_max = -1e308;
    double final_train_loss = 0.0;
};

struct TrainResult {
    Mlp net;
    std::vector<EpochRow> history;
    RunStats stats;
};

/// Momentum state paired with a model.
struct SgdState {
    std::vector<std::vector<double>> w_buf, b_buf;
    explicit SgdState(const Mlp& net);
};

/// One SGD + momentum + weight-decay update from precomputed gradients.
void sgd_update(Mlp& net, SgdState& state, const ParamGradients& grads, double lr,
                double momentum, double weight_decay);

/// Effective learning rate for a 0-based epoch under the two-milestone decay.
double lr_at_epoch(const OptimConfig& optim, std::size_t epoch);

TrainResult train(const Dataset& train_ds, const Dataset& test_ds,
                  const std::vector<std::size_t>& hidden, double dropout_rate,
                  const OptimConfig& optim, const TrainOptions& opts);

/// Per-epoch CSV header written by train() when metrics_csv is set:
/// epoch,clean_acc,robust_acc,mean_eps,min_eps,max_eps,train_loss
extern const char* const kMetricsCsvHeader;

}  // namespace des
