#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "des/config.hpp"
#include "des/eval.hpp"
#include "des/train.hpp"

// End-to-end runs over a RunConfig: build datasets, train, evaluate, and
// write every artifact under an output directory. The CLI is a thin wrapper
// around these. Every function is deterministic given the config (see
// rng.hpp for how streams are derived from train.seed).
//
// Artifacts:
//   train  -> resolved.cfg, metrics.csv, model.ckpt, summary.txt,
//             factors/epoch_NNN.csv (scheduled mode: first batch per epoch)
//   eval   -> eval.csv
//   sweep  -> sweep.csv
//   ablate -> ablation.csv (+ one sub-run directory per variant)
//   theory -> taylor.csv, riskgap.csv, theory.txt

namespace des {

Dataset build_train_dataset(const RunConfig& cfg);
Dataset build_test_dataset(const RunConfig& cfg);

/// Training attack from the config, with the data box applied when the
/// dataset has one.
AttackConfig make_train_attack(const RunConfig& cfg, const Dataset& ds);
/// Evaluation attack: eval.steps iterations at step eps/4, random starts.
AttackConfig make_eval_attack(const RunConfig& cfg, const Dataset& ds);

struct TrainArtifacts {
    TrainResult result;
    double final_clean = 0.0;
    double final_robust = 0.0;  // eval attack at eval.eps
    std::string checkpoint_path;
};
TrainArtifacts run_training(const RunConfig& cfg, const std::string& out_dir,
                            std::ostream* log);

struct EvalNumbers {
    double clean_acc = 0.0;
    double robust_acc = 0.0;
    double eps = 0.0;
    std::size_t steps = 0;
};
EvalNumbers run_eval(const RunConfig& cfg, const std::string& checkpoint,
                     const std::string& out_dir, std::ostream* log);

std::vector<SweepPoint> run_sweep(const RunConfig& cfg, const std::string& checkpoint,
                                  const std::vector<double>& eps_list,
                                  const std::string& out_dir, std::ostream* log);

/// Retrains with one difficulty signal removed at a time (its weight zeroed,
/// the rest renormalized), plus the full scheduler, all from the same seed.
struct AblationRow {
    std::string variant;  // full, no_grad, no_entropy, no_mc
    double alpha = 0.0, beta = 0.0, gamma = 0.0;
    double clean_acc = 0.0, robust_acc = 0.0;
};
std::vector<AblationRow> run_ablate(const RunConfig& cfg, const std::string& out_dir,
                                    std::ostream* log);

/// First-order and risk-gap checks on a trained model (trains one with cfg
/// unless a checkpoint is supplied). Needs an input dimension <= 3 for the
/// exhaustive oracle.
struct TheoryNumbers {
    std::vector<TaylorCheck> taylor;  // half and full radius around eval.eps
    RiskGapCheck risk;
};
TheoryNumbers run_theory(const RunConfig& cfg, const std::string& checkpoint,
                         const std::string& out_dir, std::ostream* log);

}  // namespace des
