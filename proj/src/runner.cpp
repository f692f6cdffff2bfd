#include "des/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>

#include "des/fmt.hpp"
#include "des/kernels.hpp"
#include "des/rng.hpp"
#include "des/scheduler.hpp"

namespace fs = std::filesystem;

namespace des {

namespace {

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
    return os;
}

void apply_box(AttackConfig& cfg, const Dataset& ds) {
    cfg.has_box = ds.has_box;
    cfg.box_lo = ds.box_lo;
    cfg.box_hi = ds.box_hi;
}

}  // namespace

Dataset build_train_dataset(const RunConfig& cfg) {
    switch (cfg.dataset) {
        case DatasetKind::TwoMoons:
            return make_two_moons(cfg.n, cfg.noise, derive(cfg.seed, 0ULL));
        case DatasetKind::Blobs:
            return make_gaussian_blobs(cfg.n, 2, cfg.stddev, derive(cfg.seed, 0ULL));
        case DatasetKind::Idx:
            return load_idx(cfg.images, cfg.labels, cfg.limit);
    }
    throw std::logic_error("unreachable dataset kind");
}

Dataset build_test_dataset(const RunConfig& cfg) {
    switch (cfg.dataset) {
        case DatasetKind::TwoMoons:
            return make_two_moons(cfg.test_n, cfg.noise, derive(cfg.seed, 1ULL));
        case DatasetKind::Blobs:
            return make_gaussian_blobs(cfg.test_n, 2, cfg.stddev, derive(cfg.seed, 1ULL));
        case DatasetKind::Idx:
            return load_idx(cfg.test_images, cfg.test_labels, cfg.test_limit);
    }
    throw std::logic_error("unreachable dataset kind");
}

AttackConfig make_train_attack(const RunConfig& cfg, const Dataset& ds) {
    AttackConfig a;
    a.steps = cfg.attack_steps;
    a.step_size = cfg.attack_step_size;
    a.step_relative = cfg.attack_step_relative;
    a.random_start = cfg.attack_random_start;
    apply_box(a, ds);
    return a;
}

AttackConfig make_eval_attack(const RunConfig& cfg, const Dataset& ds) {
    AttackConfig a;
    a.steps = cfg.eval_steps;
    a.step_size = 0.25;
    a.step_relative = true;
    a.random_start = true;
    apply_box(a, ds);
    return a;
}

TrainArtifacts run_training(const RunConfig& cfg, const std::string& out_dir,
                            std::ostream* log) {
    cfg.validate();
    const fs::path out(out_dir);
    fs::create_directories(out);
    {
        std::ofstream rc = open_out(out / "resolved.cfg");
        write_config(rc, cfg);
    }

    const Dataset train_ds = build_train_dataset(cfg);
    const Dataset test_ds = build_test_dataset(cfg);

    std::ofstream metrics = open_out(out / "metrics.csv");

    TrainOptions opts;
    opts.mode = cfg.mode;
    opts.fixed_eps = cfg.fixed_eps;
    opts.schedule = cfg.schedule;
    opts.attack = make_train_attack(cfg, train_ds);
    opts.probe_steps = 10;
    opts.probe_eps = cfg.eval_eps;
    opts.seed = cfg.seed;
    opts.metrics_csv = &metrics;
    opts.log = log;
    if (cfg.mode == TrainMode::Scheduled) {
        const fs::path factors = out / "factors";
        fs::create_directories(factors);
        opts.factor_sink = [factors](std::size_t epoch) -> std::unique_ptr<std::ostream> {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03zu.csv", epoch);
            auto os = std::make_unique<std::ofstream>(factors / name);
            if (!*os) throw std::runtime_error("cannot open factor csv for epoch " +
                                               std::to_string(epoch));
            return os;
        };
    }

    TrainArtifacts art;
    art.result = train(train_ds, test_ds, cfg.hidden, cfg.dropout, cfg.optim, opts);

    art.checkpoint_path = (out / "model.ckpt").string();
    save_checkpoint(art.result.net, art.checkpoint_path);

    AttackConfig final_atk = make_eval_attack(cfg, test_ds);
    final_atk.seed = derive(cfg.seed, kTagEval);
    art.final_clean = clean_accuracy(art.result.net, test_ds);
    art.final_robust = robust_accuracy(art.result.net, test_ds, cfg.eval_eps, final_atk);

    {
        std::ofstream s = open_out(out / "summary.txt");
        const RunStats& st = art.result.stats;
        s << "dataset = " << dataset_name(cfg.dataset) << '\n';
        s << "mode = " << mode_name(cfg.mode) << '\n';
        s << "epochs = " << cfg.optim.epochs << '\n';
        s << "final_clean_acc = " << fmt(art.final_clean) << '\n';
        s << "final_robust_acc = " << fmt(art.final_robust) << '\n';
        s << "eval_eps = " << fmt(cfg.eval_eps) << '\n';
        s << "eval_steps = " << cfg.eval_steps << '\n';
        s << "eps_min_seen = " << fmt(st.eps_min) << '\n';
        s << "eps_max_seen = " << fmt(st.eps_max) << '\n';
        if (cfg.mode == TrainMode::Scheduled) {
            s << "sigma_min_seen = " << fmt(st.sigma_min) << '\n';
            s << "sigma_max_seen = " << fmt(st.sigma_max) << '\n';
        }
        s << "max_ball_gap = " << fmt(st.max_ball_gap) << '\n';
        s << "max_param_grad_norm = " << fmt(st.max_param_grad_norm) << '\n';
        s << "final_train_loss = " << fmt(st.final_train_loss) << '\n';
        s << "kernel_backend = " << kernels::backend_name(kernels::active_backend()) << '\n';
    }
    if (log)
        *log << "final  clean " << fmt(art.final_clean) << "  robust " << fmt(art.final_robust)
             << " @ eps " << fmt(cfg.eval_eps) << '\n';
    return art;
}

EvalNumbers run_eval(const RunConfig& cfg, const std::string& checkpoint,
                     const std::string& out_dir, std::ostream* log) {
    cfg.validate();
    const Mlp net = load_checkpoint(checkpoint);
    const Dataset test_ds = build_test_dataset(cfg);
    if (net.input_dim() != test_ds.d || net.num_classes() != test_ds.k)
        throw std::runtime_error("eval: checkpoint shape does not match the dataset");

    AttackConfig atk = make_eval_attack(cfg, test_ds);
    atk.seed = derive(cfg.seed, kTagEval);

    EvalNumbers out;
    out.eps = cfg.eval_eps;
    out.steps = cfg.eval_steps;
    out.clean_acc = clean_accuracy(net, test_ds);
    out.robust_acc = robust_accuracy(net, test_ds, cfg.eval_eps, atk);

    fs::create_directories(out_dir);
    std::ofstream os = open_out(fs::path(out_dir) / "eval.csv");
    os << "metric,value\n";
    os << "clean_acc," << fmt(out.clean_acc) << '\n';
    os << "robust_acc," << fmt(out.robust_acc) << '\n';
    os << "eps," << fmt(out.eps) << '\n';
    os << "steps," << out.steps << '\n';
    if (log)
        *log << "clean " << fmt(out.clean_acc) << "  robust " << fmt(out.robust_acc)
             << " @ eps " << fmt(out.eps) << '\n';
    return out;
}

std::vector<SweepPoint> run_sweep(const RunConfig& cfg, const std::string& checkpoint,
                                  const std::vector<double>& eps_list,
                                  const std::string& out_dir, std::ostream* log) {
    cfg.validate();
    if (eps_list.empty()) throw std::invalid_argument("sweep: empty eps list");
    const Mlp net = load_checkpoint(checkpoint);
    const Dataset test_ds = build_test_dataset(cfg);
    if (net.input_dim() != test_ds.d || net.num_classes() != test_ds.k)
        throw std::runtime_error("sweep: checkpoint shape does not match the dataset");

    AttackConfig atk = make_eval_attack(cfg, test_ds);
    atk.seed = derive(cfg.seed, kTagEval);
    const std::vector<SweepPoint> points = eps_sweep(net, test_ds, eps_list, atk);

    fs::create_directories(out_dir);
    std::ofstream os = open_out(fs::path(out_dir) / "sweep.csv");
    os << "eps,robust_acc\n";
    for (const SweepPoint& p : points) {
        os << fmt(p.eps) << ',' << fmt(p.robust_acc) << '\n';
        if (log) *log << "eps " << fmt(p.eps) << "  robust " << fmt(p.robust_acc) << '\n';
    }
    return points;
}

std::vector<AblationRow> run_ablate(const RunConfig& cfg, const std::string& out_dir,
                                    std::ostream* log) {
    cfg.validate();
    if (cfg.mode != TrainMode::Scheduled)
        throw ConfigError("ablate: train.mode must be scheduled");

    struct Variant {
        const char* name;
        int drop;  // -1 none, 0 alpha, 1 beta, 2 gamma
    };
    const Variant variants[] = {{"full", -1}, {"no_grad", 0}, {"no_entropy", 1}, {"no_mc", 2}};

    std::vector<AblationRow> rows;
    for (const Variant& v : variants) {
        RunConfig c = cfg;
        double w[3] = {c.schedule.alpha, c.schedule.beta, c.schedule.gamma};
        if (v.drop >= 0) {
            w[v.drop] = 0.0;
            const double s = w[0] + w[1] + w[2];
            if (s < 1e-12)
                throw ConfigError(std::string("ablate: dropping the ") + v.name +
                                  " signal leaves zero total weight");
            for (double& x : w) x /= s;
        }
        c.schedule.alpha = w[0];
        c.schedule.beta = w[1];
        c.schedule.gamma = w[2];

        if (log) *log << "ablation variant " << v.name << "\n";
        const TrainArtifacts art =
            run_training(c, (fs::path(out_dir) / v.name).string(), log);

        AblationRow row;
        row.variant = v.name;
        row.alpha = w[0];
        row.beta = w[1];
        row.gamma = w[2];
        row.clean_acc = art.final_clean;
        row.robust_acc = art.final_robust;
        rows.push_back(row);
    }

    std::ofstream os = open_out(fs::path(out_dir) / "ablation.csv");
    os << "variant,alpha,beta,gamma,clean_acc,robust_acc\n";
    for (const AblationRow& r : rows)
        os << r.variant << ',' << fmt(r.alpha) << ',' << fmt(r.beta) << ',' << fmt(r.gamma)
           << ',' << fmt(r.clean_acc) << ',' << fmt(r.robust_acc) << '\n';
    return rows;
}

TheoryNumbers run_theory(const RunConfig& cfg, const std::string& checkpoint,
                         const std::string& out_dir, std::ostream* log) {
    cfg.validate();
    const Dataset test_ds = build_test_dataset(cfg);
    if (test_ds.d > 3)
        throw ConfigError("theory: the exhaustive oracle needs an input dimension <= 3");

    Mlp net;
    if (!checkpoint.empty()) {
        net = load_checkpoint(checkpoint);
        if (net.input_dim() != test_ds.d || net.num_classes() != test_ds.k)
            throw std::runtime_error("theory: checkpoint shape does not match the dataset");
    } else {
        const Dataset train_ds = build_train_dataset(cfg);
        TrainOptions opts;
        opts.mode = cfg.mode;
        opts.fixed_eps = cfg.fixed_eps;
        opts.schedule = cfg.schedule;
        opts.attack = make_train_attack(cfg, train_ds);
        opts.probe_eps = cfg.eval_eps;
        opts.seed = cfg.seed;
        opts.log = log;
        net = train(train_ds, test_ds, cfg.hidden, cfg.dropout, cfg.optim, opts).net;
    }

    const std::size_t m = std::min<std::size_t>(64, test_ds.n);
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    const Batch batch = gather(test_ds, idx);

    constexpr std::size_t kResolution = 41;
    TheoryNumbers out;
    out.taylor.push_back(
        taylor_check(net, batch.x.data(), m, batch.labels, cfg.eval_eps / 2.0, kResolution));
    out.taylor.push_back(
        taylor_check(net, batch.x.data(), m, batch.labels, cfg.eval_eps, kResolution));

    const ScheduleResult sched = compute_schedule(net, batch.x.data(), m, batch.labels,
                                                  cfg.schedule, derive(cfg.seed, kTagMc));
    out.risk = risk_gap_check(net, batch.x.data(), m, batch.labels, cfg.eval_eps,
                              sched.scores.eps, kResolution);

    fs::create_directories(out_dir);
    {
        std::ofstream os = open_out(fs::path(out_dir) / "taylor.csv");
        os << "eps,sample_index,actual,predicted,abs_err\n";
        for (const TaylorCheck& t : out.taylor)
            for (std::size_t i = 0; i < m; ++i)
                os << fmt(t.eps) << ',' << i << ',' << fmt(t.actual[i]) << ','
                   << fmt(t.predicted[i]) << ',' << fmt(std::fabs(t.actual[i] - t.predicted[i]))
                   << '\n';
    }
    {
        const RiskGapCheck& r = out.risk;
        std::ofstream os = open_out(fs::path(out_dir) / "riskgap.csv");
        os << "risk_fixed,risk_adaptive,gap,lhat,mean_abs_eps_diff,bound,bound_per_sample,"
              "holds\n";
        os << fmt(r.risk_fixed) << ',' << fmt(r.risk_adaptive) << ',' << fmt(r.gap) << ','
           << fmt(r.lhat) << ',' << fmt(r.mean_abs_eps_diff) << ',' << fmt(r.bound) << ','
           << fmt(r.bound_per_sample) << ',' << (r.holds() ? "true" : "false") << '\n';
    }
    {
        std::ofstream s = open_out(fs::path(out_dir) / "theory.txt");
        const RiskGapCheck& r = out.risk;
        for (const TaylorCheck& t : out.taylor) {
            double max_err = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double e = std::fabs(t.actual[i] - t.predicted[i]);
                max_err = e > max_err ? e : max_err;
            }
            s << "first_order eps " << fmt(t.eps) << "  max |actual - predicted| = "
              << fmt(max_err) << '\n';
        }
        s << "risk_fixed = " << fmt(r.risk_fixed) << '\n';
        s << "risk_adaptive = " << fmt(r.risk_adaptive) << '\n';
        s << "gap = " << fmt(r.gap) << '\n';
        s << "lhat = " << fmt(r.lhat) << '\n';
        s << "mean_abs_eps_diff = " << fmt(r.mean_abs_eps_diff) << '\n';
        s << "bound = " << fmt(r.bound) << '\n';
        s << "bound_per_sample = " << fmt(r.bound_per_sample) << '\n';
        s << "holds = " << (r.holds() ? "true" : "false") << '\n';
    }
    if (log) {
        const RiskGapCheck& r = out.risk;
        *log << "risk gap " << fmt(r.gap) << " <= bound " << fmt(r.bound) << " (lhat "
             << fmt(r.lhat) << ", mean |eps diff| " << fmt(r.mean_abs_eps_diff) << "): "
             << (r.holds() ? "holds" : "VIOLATED") << '\n';
    }
    return out;
}

}  // namespace des
