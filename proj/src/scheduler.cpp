#include "des/scheduler.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "des/fmt.hpp"
#include "des/kernels.hpp"

namespace des {

void ScheduleConfig::validate() const {
    if (!(eps_min >= 0.0)) throw std::invalid_argument("schedule: eps_min must be >= 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("schedule: lambda must be >= 0");
    if (!(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0))
        throw std::invalid_argument("schedule: fusion weights must be >= 0");
    const double s = alpha + beta + gamma;
    if (std::fabs(s - 1.0) > 1e-9)
        throw std::invalid_argument("schedule: fusion weights must sum to 1, got " + fmt(s));
    if (mc_passes < 1) throw std::invalid_argument("schedule: mc_passes must be >= 1");
}

std::vector<double> gradient_row_norms(const std::vector<double>& grad_x, std::size_t m,
                                       std::size_t d) {
    if (grad_x.size() != m * d)
        throw std::invalid_argument("gradient_row_norms: bad matrix size");
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i)
        out[i] = std::sqrt(kernels::sumsq(grad_x.data() + i * d, d));
    return out;
}

std::vector<double> softmax_entropy(const std::vector<double>& probs, std::size_t m,
                                    std::size_t k) {
    if (probs.size() != m * k) throw std::invalid_argument("softmax_entropy: bad matrix size");
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* p = probs.data() + i * k;
        double sum = 0.0, h = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (p[j] < 0.0)
                throw std::domain_error("softmax_entropy: negative probability at row " +
                                        std::to_string(i));
            sum += p[j];
            if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::domain_error("softmax_entropy: row " + std::to_string(i) +
                                    " sums to " + fmt(sum) + ", not 1");
        out[i] = h;
    }
    return out;
}

std::vector<double> mc_uncertainty(const std::vector<std::vector<double>>& pass_probs,
                                   std::size_t m, std::size_t k) {
    if (pass_probs.empty()) throw std::invalid_argument("mc_uncertainty: no passes");
    const std::size_t T = pass_probs.size();
    for (const auto& p : pass_probs)
        if (p.size() != m * k) throw std::invalid_argument("mc_uncertainty: bad pass size");
    std::vector<double> out(m);
    // Pairwise form of the population variance,
    //   var = sum_{s,t} (p_s - p_t)^2 / (2 T^2),
    // chosen over the centered form because it is cancellation-free:
    // bitwise-identical passes yield exactly zero, so a dropout-free model
    // contributes no uncertainty signal even in the last ulp.
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            double sq = 0.0;
            for (std::size_t s = 1; s < T; ++s)
                for (std::size_t t = 0; t < s; ++t) {
                    const double dv = pass_probs[s][i * k + j] - pass_probs[t][i * k + j];
                    sq += dv * dv;
                }
            acc += sq / static_cast<double>(T * T);
        }
        out[i] = acc / static_cast<double>(k);
    }
    return out;
}

std::vector<double> minmax_normalize(const std::vector<double>& v) {
    if (v.empty()) return {};
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = x < lo ? x : lo;
        hi = x > hi ? x : hi;
    }
    std::vector<double> out(v.size());
    if (hi - lo < 1e-12) {
        for (double& x : out) x = 0.5;
        return out;
    }
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) * inv;
    return out;
}

std::vector<double> fuse_difficulty(const std::vector<double>& g_norm,
                                    const std::vector<double>& h_norm,
                                    const std::vector<double>& u_norm, double alpha,
                                    double beta, double gamma) {
    if (g_norm.size() != h_norm.size() || g_norm.size() != u_norm.size())
        throw std::invalid_argument("fuse_difficulty: signal length mismatch");
    std::vector<double> out(g_norm.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = alpha * g_norm[i] + beta * h_norm[i] + gamma * u_norm[i];
        s = s > 0.0 ? s : 0.0;
        s = s < 1.0 ? s : 1.0;
        out[i] = s;
    }
    return out;
}

std::vector<double> epsilon_budget(const std::vector<double>& sigma, double eps_min,
                                   double lambda) {
    std::vector<double> out(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (!(sigma[i] >= 0.0 && sigma[i] <= 1.0))
            throw std::domain_error("epsilon_budget: sigma " + fmt(sigma[i]) +
                                    " outside [0,1] at index " + std::to_string(i));
        out[i] = eps_min + lambda * sigma[i];
    }
    return out;
}

ScheduleResult compute_schedule(const Mlp& net, const double* x, std::size_t m,
                                const std::vector<int>& labels, const ScheduleConfig& cfg,
                                std::uint64_t mc_seed) {
    cfg.validate();
    ScheduleResult res;
    InputGradients ig = input_gradients(net, x, m, labels);
    const std::size_t d = net.input_dim();
    const std::size_t k = net.num_classes();

    FactorScores& s = res.scores;
    s.g = gradient_row_norms(ig.grad_x, m, d);
    s.h = softmax_entropy(ig.probs, m, k);
    s.u = mc_uncertainty(mc_forward(net, x, m, cfg.mc_passes, mc_seed), m, k);
    s.g_norm = minmax_normalize(s.g);
    s.h_norm = minmax_normalize(s.h);
    s.u_norm = minmax_normalize(s.u);
    s.sigma = fuse_difficulty(s.g_norm, s.h_norm, s.u_norm, cfg.alpha, cfg.beta, cfg.gamma);
    s.eps = epsilon_budget(s.sigma, cfg.eps_min, cfg.lambda);

    res.grad_x = std::move(ig.grad_x);
    res.probs = std::move(ig.probs);
    res.mean_loss = ig.mean_loss;
    return res;
}

void write_factor_csv(std::ostream& os, const FactorScores& s) {
    os << "sample_index,g,h,u,g_norm,h_norm,u_norm,sigma,eps\n";
    for (std::size_t i = 0; i < s.eps.size(); ++i) {
        os << i << ',' << fmt(s.g[i]) << ',' << fmt(s.h[i]) << ',' << fmt(s.u[i]) << ','
           << fmt(s.g_norm[i]) << ',' << fmt(s.h_norm[i]) << ',' << fmt(s.u_norm[i]) << ','
           << fmt(s.sigma[i]) << ',' << fmt(s.eps[i]) << '\n';
    }
}

}  // namespace des
