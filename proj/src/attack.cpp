#include "des/attack.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "des/kernels.hpp"
#include "des/rng.hpp"

namespace des {

void AttackConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("attack: steps must be >= 1");
    if (!(step_size > 0.0)) throw std::invalid_argument("attack: step size must be > 0");
    if (has_box && !(box_lo < box_hi))
        throw std::invalid_argument("attack: box bounds must satisfy lo < hi");
}

namespace {

void check_batch(const Mlp& net, std::size_t m, const std::vector<int>& labels,
                 const std::vector<double>& eps) {
    if (labels.size() != m) throw std::invalid_argument("attack: labels size mismatch");
    if (eps.size() != m) throw std::invalid_argument("attack: eps size mismatch");
    for (double e : eps)
        if (!(e >= 0.0)) throw std::invalid_argument("attack: eps must be >= 0");
    (void)net;
}

}  // namespace

std::vector<double> pgd(const Mlp& net, const double* x, std::size_t m,
                        const std::vector<int>& labels, const std::vector<double>& eps,
                        const AttackConfig& cfg, const double* first_grad) {
    cfg.validate();
    check_batch(net, m, labels, eps);
    const std::size_t d = net.input_dim();
    std::vector<double> adv(x, x + m * d);

    if (cfg.random_start) {
        for (std::size_t i = 0; i < m; ++i) {
            Rng rng(derive(cfg.seed, i));
            double* row = adv.data() + i * d;
            for (std::size_t j = 0; j < d; ++j)
                row[j] += eps[i] * rng.uniform(-1.0, 1.0);
            if (cfg.has_box) {
                for (std::size_t j = 0; j < d; ++j) {
                    row[j] = row[j] > cfg.box_lo ? row[j] : cfg.box_lo;
                    row[j] = row[j] < cfg.box_hi ? row[j] : cfg.box_hi;
                }
            }
        }
    }

    for (std::size_t t = 0; t < cfg.steps; ++t) {
        std::vector<double> grad;
        if (t == 0 && first_grad != nullptr && !cfg.random_start) {
            grad.assign(first_grad, first_grad + m * d);
        } else {
            grad = input_gradients(net, adv.data(), m, labels).grad_x;
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double step = cfg.step_relative ? cfg.step_size * eps[i] : cfg.step_size;
            kernels::sign_step_clamp(adv.data() + i * d, grad.data() + i * d, x + i * d,
                                     step, eps[i], cfg.has_box, cfg.box_lo, cfg.box_hi,
                                     adv.data() + i * d, d);
        }
    }
    return adv;
}

std::vector<double> fgsm(const Mlp& net, const double* x, std::size_t m,
                         const std::vector<int>& labels, const std::vector<double>& eps,
                         bool has_box, double box_lo, double box_hi) {
    AttackConfig cfg;
    cfg.steps = 1;
    cfg.step_size = 1.0;
    cfg.step_relative = true;  // step eps_i, lands on the ball surface
    cfg.random_start = false;
    cfg.has_box = has_box;
    cfg.box_lo = box_lo;
    cfg.box_hi = box_hi;
    return pgd(net, x, m, labels, eps, cfg);
}

GridOracleResult grid_oracle(const Mlp& net, const double* x, std::size_t m,
                             const std::vector<int>& labels, const std::vector<double>& eps,
                             std::size_t resolution, bool has_box, double box_lo,
                             double box_hi) {
    check_batch(net, m, labels, eps);
    const std::size_t d = net.input_dim();
    if (d > 3)
        throw std::invalid_argument("grid_oracle: exhaustive search needs input dim <= 3, got " +
                                    std::to_string(d));
    if (resolution < 3 || resolution % 2 == 0)
        throw std::invalid_argument("grid_oracle: resolution must be odd and >= 3");

    std::size_t n_points = 1;
    for (std::size_t j = 0; j < d; ++j) n_points *= resolution;

    GridOracleResult res;
    res.x_worst.resize(m * d);
    res.loss_worst.assign(m, 0.0);

    std::vector<double> pts(n_points * d);
    std::vector<int> pt_labels(n_points);
    std::vector<double> probs, losses;

    for (std::size_t i = 0; i < m; ++i) {
        const double* x0 = x + i * d;
        const double e = eps[i];
        // grid offsets -e .. +e, resolution per axis; center index hits 0
        for (std::size_t p = 0; p < n_points; ++p) {
            std::size_t rem = p;
            for (std::size_t j = 0; j < d; ++j) {
                const std::size_t idx = rem % resolution;
                rem /= resolution;
                double v = x0[j] - e +
                           2.0 * e * static_cast<double>(idx) /
                               static_cast<double>(resolution - 1);
                if (has_box) {
                    v = v > box_lo ? v : box_lo;
                    v = v < box_hi ? v : box_hi;
                }
                pts[p * d + j] = v;
            }
        }
        std::fill(pt_labels.begin(), pt_labels.end(), labels[i]);
        forward_probs(net, pts.data(), n_points, {}, probs);
        per_sample_losses(probs, net.num_classes(), pt_labels, losses);
        std::size_t best = 0;
        for (std::size_t p = 1; p < n_points; ++p)
            if (losses[p] > losses[best]) best = p;  // strict: ties keep first
        res.loss_worst[i] = losses[best];
        for (std::size_t j = 0; j < d; ++j) res.x_worst[i * d + j] = pts[best * d + j];
    }
    return res;
}

}  // namespace des
