#include "des/eval.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "des/kernels.hpp"
#include "des/parallel.hpp"
#include "des/rng.hpp"

namespace des {

namespace {

constexpr std::size_t kEvalChunk = 256;

std::size_t argmax_row(const double* p, std::size_t k) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
        if (p[j] > p[best]) best = j;  // strict: ties keep the lowest index
    return best;
}

double mean_of(const std::vector<std::uint8_t>& hits) {
    std::size_t s = 0;
    for (std::uint8_t h : hits) s += h;
    return static_cast<double>(s) / static_cast<double>(hits.size());
}

}  // namespace

double clean_accuracy(const Mlp& net, const Dataset& ds) {
    if (ds.n == 0) throw std::invalid_argument("clean_accuracy: empty dataset");
    const std::size_t k = net.num_classes();
    std::vector<std::uint8_t> hits(ds.n, 0);
    parallel_for(ds.n, [&](std::size_t b, std::size_t e) {
        std::vector<double> probs;
        forward_probs(net, ds.x.data() + b * ds.d, e - b, {}, probs);
        for (std::size_t i = b; i < e; ++i)
            hits[i] = argmax_row(probs.data() + (i - b) * k, k) ==
                      static_cast<std::size_t>(ds.labels[i]);
    }, kEvalChunk);
    return mean_of(hits);
}

double robust_accuracy(const Mlp& net, const Dataset& ds, double eps,
                       const AttackConfig& cfg) {
    if (ds.n == 0) throw std::invalid_argument("robust_accuracy: empty dataset");
    if (!(eps >= 0.0)) throw std::invalid_argument("robust_accuracy: eps must be >= 0");
    const std::size_t k = net.num_classes();
    std::vector<std::uint8_t> hits(ds.n, 0);
    parallel_for(ds.n, [&](std::size_t b, std::size_t e) {
        const std::size_t m = e - b;
        const std::vector<int> labels(ds.labels.begin() + static_cast<std::ptrdiff_t>(b),
                                      ds.labels.begin() + static_cast<std::ptrdiff_t>(e));
        const std::vector<double> eps_vec(m, eps);
        AttackConfig chunk_cfg = cfg;
        chunk_cfg.seed = derive(cfg.seed, b);
        const std::vector<double> adv =
            pgd(net, ds.x.data() + b * ds.d, m, labels, eps_vec, chunk_cfg);
        std::vector<double> probs;
        forward_probs(net, adv.data(), m, {}, probs);
        for (std::size_t i = 0; i < m; ++i)
            hits[b + i] = argmax_row(probs.data() + i * k, k) ==
                          static_cast<std::size_t>(labels[i]);
    }, kEvalChunk);
    return mean_of(hits);
}

std::vector<SweepPoint> eps_sweep(const Mlp& net, const Dataset& ds,
                                  const std::vector<double>& eps_list,
                                  const AttackConfig& cfg) {
    if (eps_list.empty()) throw std::invalid_argument("eps_sweep: empty eps list");
    std::vector<SweepPoint> out;
    out.reserve(eps_list.size());
    for (double e : eps_list) out.push_back({e, robust_accuracy(net, ds, e, cfg)});
    return out;
}

TaylorCheck taylor_check(const Mlp& net, const double* x, std::size_t m,
                         const std::vector<int>& labels, double eps,
                         std::size_t resolution) {
    if (!(eps > 0.0)) throw std::invalid_argument("taylor_check: eps must be > 0");
    TaylorCheck out;
    out.eps = eps;
    const std::size_t d = net.input_dim();
    const std::size_t k = net.num_classes();

    InputGradients ig = input_gradients(net, x, m, labels);
    std::vector<double> clean_loss;
    per_sample_losses(ig.probs, k, labels, clean_loss);

    const std::vector<double> eps_vec(m, eps);
    GridOracleResult worst = grid_oracle(net, x, m, labels, eps_vec, resolution);

    out.actual.resize(m);
    out.predicted.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.actual[i] = worst.loss_worst[i] - clean_loss[i];
        out.predicted[i] = eps * kernels::asum(ig.grad_x.data() + i * d, d);
    }
    return out;
}

RiskGapCheck risk_gap_check(const Mlp& net, const double* x, std::size_t m,
                            const std::vector<int>& labels, double eps_fixed,
                            const std::vector<double>& eps_adaptive,
                            std::size_t resolution) {
    if (!(eps_fixed >= 0.0))
        throw std::invalid_argument("risk_gap_check: eps_fixed must be >= 0");
    if (eps_adaptive.size() != m)
        throw std::invalid_argument("risk_gap_check: eps size mismatch");
    const std::size_t d = net.input_dim();
    if (d > 3) throw std::invalid_argument("risk_gap_check: needs input dim <= 3");
    if (resolution < 3 || resolution % 2 == 0)
        throw std::invalid_argument("risk_gap_check: resolution must be odd and >= 3");

    const std::vector<double> eps_f(m, eps_fixed);
    const GridOracleResult worst_fixed = grid_oracle(net, x, m, labels, eps_f, resolution);
    const GridOracleResult worst_adapt =
        grid_oracle(net, x, m, labels, eps_adaptive, resolution);

    RiskGapCheck out;
    out.risk_fixed = kernels::sum(worst_fixed.loss_worst.data(), m) / static_cast<double>(m);
    out.risk_adaptive =
        kernels::sum(worst_adapt.loss_worst.data(), m) / static_cast<double>(m);
    out.gap = std::fabs(out.risk_adaptive - out.risk_fixed);

    // Empirical Lipschitz constant of eps -> worst-in-ball loss: the largest
    // gradient l1 norm over both grids of each sample (the larger ball
    // contains the path between the two radii).
    std::size_t n_points = 1;
    for (std::size_t j = 0; j < d; ++j) n_points *= resolution;
    std::vector<double> pts(2 * n_points * d);
    std::vector<int> pt_labels(2 * n_points);
    double acc_per_sample = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* x0 = x + i * d;
        const double radii[2] = {eps_fixed, eps_adaptive[i]};
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t p = 0; p < n_points; ++p) {
                std::size_t rem = p;
                for (std::size_t j = 0; j < d; ++j) {
                    const std::size_t idx = rem % resolution;
                    rem /= resolution;
                    pts[(r * n_points + p) * d + j] =
                        x0[j] - radii[r] +
                        2.0 * radii[r] * static_cast<double>(idx) /
                            static_cast<double>(resolution - 1);
                }
            }
        }
        std::fill(pt_labels.begin(), pt_labels.end(), labels[i]);
        InputGradients ig = input_gradients(net, pts.data(), 2 * n_points, pt_labels);
        double lhat_i = 0.0;
        for (std::size_t p = 0; p < 2 * n_points; ++p) {
            const double l1 = kernels::asum(ig.grad_x.data() + p * d, d);
            lhat_i = l1 > lhat_i ? l1 : lhat_i;
        }
        out.lhat = lhat_i > out.lhat ? lhat_i : out.lhat;
        out.mean_abs_eps_diff += std::fabs(eps_adaptive[i] - eps_fixed);
        acc_per_sample += lhat_i * std::fabs(eps_adaptive[i] - eps_fixed);
    }
    out.mean_abs_eps_diff /= static_cast<double>(m);
    out.bound = out.lhat * out.mean_abs_eps_diff;
    out.bound_per_sample = acc_per_sample / static_cast<double>(m);
    return out;
}

}  // namespace des
