#include "des/kernels.hpp"

#include <cmath>

// Scalar reference kernels. The clamp/relu selects are written with the exact
// (a > b) ? a : b ordering the AVX2 max/min instructions use so the two
// backends agree bitwise even on signed-zero edge cases.

namespace des::kernels {
namespace {

void k_add(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void k_scale(const double* a, double s, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = s * a[i];
}

void k_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void k_relu(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void k_relu_grad_accum(const double* x, const double* dy, double* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = dx[i] + (x[i] > 0.0 ? dy[i] : 0.0);
}

double k_sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double k_sumsq(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

double k_asum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}

void k_sgd_momentum(double* param, double* buf, const double* grad,
                    double lr, double momentum, double wd, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double b = momentum * buf[i] + (grad[i] + wd * param[i]);
        buf[i] = b;
        param[i] = param[i] - lr * b;
    }
}

void k_sign_step_clamp(const double* x, const double* g, const double* x0,
                       double step, double eps, bool has_box, double lo,
                       double hi, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
        double v = x[i] + step * s;
        const double blo = x0[i] - eps;
        const double bhi = x0[i] + eps;
        v = v > blo ? v : blo;
        v = v < bhi ? v : bhi;
        if (has_box) {
            v = v > lo ? v : lo;
            v = v < hi ? v : hi;
        }
        out[i] = v;
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{k_add,  k_sub,   k_mul,  k_scale, k_axpy,
                         k_relu, k_relu_grad_accum, k_sum, k_sumsq, k_asum,
                         k_sgd_momentum, k_sign_step_clamp};
    return ops;
}

}  // namespace des::kernels
