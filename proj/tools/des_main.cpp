#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "des/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"adversarial training with per-sample scheduled perturbation budgets"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string checkpoint;
    std::vector<double> eps_list;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_checkpoint) {
        cmd->add_option("--config", config_path, "run configuration file")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "output directory (default: out)");
        auto* s = cmd->add_option("--seed", seed, "override train.seed from the config");
        auto* c = cmd->add_option("--checkpoint", checkpoint, "model checkpoint")
                      ->check(CLI::ExistingFile);
        if (needs_checkpoint) c->required();
        return s;
    };

    CLI::App* cmd_train = app.add_subcommand("train", "train a model and write artifacts");
    CLI::Option* train_seed = add_common(cmd_train, false);

    CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on the test set");
    CLI::Option* eval_seed = add_common(cmd_eval, true);

    CLI::App* cmd_sweep =
        app.add_subcommand("sweep", "robust accuracy of a checkpoint across radii");
    CLI::Option* sweep_seed = add_common(cmd_sweep, true);
    cmd_sweep->add_option("--eps-list", eps_list, "comma-separated radii")
        ->required()
        ->delimiter(',');

    CLI::App* cmd_ablate =
        app.add_subcommand("ablate", "retrain with each difficulty signal removed");
    CLI::Option* ablate_seed = add_common(cmd_ablate, false);

    CLI::App* cmd_theory = app.add_subcommand(
        "theory", "first-order and risk-gap checks against the exhaustive oracle");
    CLI::Option* theory_seed = add_common(cmd_theory, false);

    CLI11_PARSE(app, argc, argv);

    try {
        des::RunConfig cfg = des::parse_config_file(config_path);
        auto apply_seed = [&](CLI::Option* opt) {
            if (opt->count() > 0) cfg.seed = seed;
        };

        if (cmd_train->parsed()) {
            apply_seed(train_seed);
            des::run_training(cfg, out_dir, &std::cout);
        } else if (cmd_eval->parsed()) {
            apply_seed(eval_seed);
            des::run_eval(cfg, checkpoint, out_dir, &std::cout);
        } else if (cmd_sweep->parsed()) {
            apply_seed(sweep_seed);
            des::run_sweep(cfg, checkpoint, eps_list, out_dir, &std::cout);
        } else if (cmd_ablate->parsed()) {
            apply_seed(ablate_seed);
            des::run_ablate(cfg, out_dir, &std::cout);
        } else if (cmd_theory->parsed()) {
            apply_seed(theory_seed);
            des::run_theory(cfg, checkpoint, out_dir, &std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
