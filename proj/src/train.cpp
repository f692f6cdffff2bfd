#include "des/train.hpp"

#include <cmath>
#include <ostream>

#include "des/fmt.hpp"
#include "des/kernels.hpp"
#include "des/rng.hpp"

namespace des {

const char* const kMetricsCsvHeader =
    "epoch,clean_acc,robust_acc,mean_eps,min_eps,max_eps,train_loss";

void OptimConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("optim: lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw std::invalid_argument("optim: momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("optim: weight decay must be >= 0");
    if (epochs < 1) throw std::invalid_argument("optim: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("optim: batch size must be >= 1");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0))
        throw std::invalid_argument("optim: lr decay must be in (0, 1]");
}

SgdState::SgdState(const Mlp& net) {
    for (const Layer& l : net.layers) {
        w_buf.emplace_back(l.w.size(), 0.0);
        b_buf.emplace_back(l.b.size(), 0.0);
    }
}

void sgd_update(Mlp& net, SgdState& state, const ParamGradients& grads, double lr,
                double momentum, double weight_decay) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Layer& lay = net.layers[l];
        kernels::sgd_momentum(lay.w.data(), state.w_buf[l].data(), grads.w_grad[l].data(),
                              lr, momentum, weight_decay, lay.w.size());
        kernels::sgd_momentum(lay.b.data(), state.b_buf[l].data(), grads.b_grad[l].data(),
                              lr, momentum, weight_decay, lay.b.size());
    }
}

double lr_at_epoch(const OptimConfig& optim, std::size_t epoch) {
    const std::size_t m1 = (optim.epochs * 3) / 4;
    const std::size_t m2 = (optim.epochs * 9) / 10;
    double lr = optim.lr;
    if (epoch >= m1) lr *= optim.lr_decay;
    if (epoch >= m2) lr *= optim.lr_decay;
    return lr;
}

namespace {

double param_grad_l2(const ParamGradients& g) {
    double acc = 0.0;
    for (const auto& v : g.w_grad) acc += kernels::sumsq(v.data(), v.size());
    for (const auto& v : g.b_grad) acc += kernels::sumsq(v.data(), v.size());
    return std::sqrt(acc);
}

double max_ball_gap(const double* adv, const double* x, std::size_t m, std::size_t d,
                    const std::vector<double>& eps) {
    double gap = -1e308;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double g = std::fabs(adv[i * d + j] - x[i * d + j]) - eps[i];
            gap = g > gap ? g : gap;
        }
    }
    return gap;
}

}  // namespace

TrainResult train(const Dataset& train_ds, const Dataset& test_ds,
                  const std::vector<std::size_t>& hidden, double dropout_rate,
                  const OptimConfig& optim, const TrainOptions& opts) {
    optim.validate();
    opts.attack.validate();
    if (opts.mode == TrainMode::Scheduled) opts.schedule.validate();
    if (!(opts.fixed_eps >= 0.0)) throw std::invalid_argument("train: fixed_eps must be >= 0");
    if (!(opts.probe_eps >= 0.0)) throw std::invalid_argument("train: probe_eps must be >= 0");
    if (opts.probe_steps < 1) throw std::invalid_argument("train: probe_steps must be >= 1");
    if (train_ds.d != test_ds.d || train_ds.k != test_ds.k)
        throw std::invalid_argument("train: train/test dataset shapes differ");

    TrainResult result;
    result.net = make_mlp(train_ds.d, hidden, train_ds.k, dropout_rate, opts.seed);
    Mlp& net = result.net;
    SgdState state(net);
    RunStats& stats = result.stats;

    Rng batch_rng(derive(opts.seed, kTagBatch));
    if (opts.metrics_csv) *opts.metrics_csv << kMetricsCsvHeader << '\n';

    for (std::size_t epoch = 0; epoch < optim.epochs; ++epoch) {
        const double lr = lr_at_epoch(optim, epoch);
        const auto batches = make_batches(train_ds.n, optim.batch_size, batch_rng);

        double eps_sum = 0.0, loss_sum = 0.0;
        double eps_lo = 1e308, eps_hi = -1e308;
        std::size_t seen = 0;

        for (std::size_t step = 0; step < batches.size(); ++step) {
            const Batch b = gather(train_ds, batches[step]);
            const std::size_t m = batches[step].size();

            std::vector<double> eps;
            const double* first_grad = nullptr;
            ScheduleResult sched;
            if (opts.mode == TrainMode::Scheduled) {
                sched = compute_schedule(net, b.x.data(), m, b.labels, opts.schedule,
                                         derive(opts.seed, kTagMc, epoch, step));
                eps = sched.scores.eps;
                if (!opts.attack.random_start) first_grad = sched.grad_x.data();
                for (double s : sched.scores.sigma) {
                    stats.sigma_min = s < stats.sigma_min ? s : stats.sigma_min;
                    stats.sigma_max = s > stats.sigma_max ? s : stats.sigma_max;
                }
                if (step == 0 && opts.factor_sink) {
                    if (auto os = opts.factor_sink(epoch)) write_factor_csv(*os, sched.scores);
                }
            } else {
                eps.assign(m, opts.fixed_eps);
            }

            AttackConfig atk = opts.attack;
            atk.seed = derive(opts.seed, kTagAttack, epoch, step);
            const std::vector<double> adv =
                pgd(net, b.x.data(), m, b.labels, eps, atk, first_grad);

            const double gap = max_ball_gap(adv.data(), b.x.data(), m, train_ds.d, eps);
            stats.max_ball_gap = gap > stats.max_ball_gap ? gap : stats.max_ball_gap;

            std::vector<std::vector<double>> masks;
            if (net.dropout_rate > 0.0) {
                Rng drop_rng(derive(opts.seed, kTagDrop, epoch, step));
                masks = make_dropout_masks(net, m, drop_rng);
            }
            const ParamGradients pg = param_gradients(net, adv.data(), m, b.labels, masks);
            if (!std::isfinite(pg.mean_loss))
                throw TrainAbort(epoch, step,
                                 "train: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", step " + std::to_string(step));
            const double gnorm = param_grad_l2(pg);
            stats.max_param_grad_norm =
                gnorm > stats.max_param_grad_norm ? gnorm : stats.max_param_grad_norm;

            sgd_update(net, state, pg, lr, optim.momentum, optim.weight_decay);

            for (double e : eps) {
                eps_sum += e;
                eps_lo = e < eps_lo ? e : eps_lo;
                eps_hi = e > eps_hi ? e : eps_hi;
            }
            loss_sum += pg.mean_loss * static_cast<double>(m);
            seen += m;
        }

        stats.eps_min = eps_lo < stats.eps_min ? eps_lo : stats.eps_min;
        stats.eps_max = eps_hi > stats.eps_max ? eps_hi : stats.eps_max;

        EpochRow row;
        row.epoch = epoch;
        row.clean_acc = clean_accuracy(net, test_ds);
        AttackConfig probe = opts.attack;
        probe.steps = opts.probe_steps;
        probe.random_start = true;
        probe.seed = derive(opts.seed, kTagProbe, epoch);
        row.robust_acc = robust_accuracy(net, test_ds, opts.probe_eps, probe);
        row.mean_eps = eps_sum / static_cast<double>(seen);
        row.min_eps = eps_lo;
        row.max_eps = eps_hi;
        row.train_loss = loss_sum / static_cast<double>(seen);
        result.history.push_back(row);
        stats.final_train_loss = row.train_loss;

        if (opts.metrics_csv) {
            *opts.metrics_csv << epoch << ',' << fmt(row.clean_acc) << ','
                              << fmt(row.robust_acc) << ',' << fmt(row.mean_eps) << ','
                              << fmt(row.min_eps) << ',' << fmt(row.max_eps) << ','
                              << fmt(row.train_loss) << '\n';
        }
        if (opts.log) {
            *opts.log << "epoch " << (epoch + 1) << '/' << optim.epochs << "  lr " << fmt(lr)
                      << "  loss " << fmt(row.train_loss) << "  clean " << fmt(row.clean_acc)
                      << "  robust " << fmt(row.robust_acc) << "  eps [" << fmt(row.min_eps)
                      << ", " << fmt(row.max_eps) << "]\n";
        }
    }
    return result;
}

}  // namespace des
