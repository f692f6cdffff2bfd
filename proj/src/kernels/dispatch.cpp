#include "des/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace des::kernels {
namespace {

Backend pick_initial() {
    const char* env = std::getenv("DES_KERNELS");
    const std::string v = env ? env : "auto";
    if (v == "scalar") return Backend::Scalar;
    if (v == "avx2") {
        if (!avx2_supported())
            throw std::runtime_error("DES_KERNELS=avx2, but this build/CPU has no AVX2");
        return Backend::Avx2;
    }
    if (v == "auto" || v.empty()) return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
    throw std::runtime_error("DES_KERNELS must be one of scalar|avx2|auto, got \"" + v + "\"");
}

Backend& current() {
    static Backend b = pick_initial();
    return b;
}

const Ops& table_for(Backend b) {
#if defined(DES_HAVE_AVX2)
    if (b == Backend::Avx2) return avx2_ops();
#else
    (void)b;
#endif
    return scalar_ops();
}

const Ops& active() { return table_for(current()); }

}  // namespace

bool avx2_supported() {
#if defined(DES_HAVE_AVX2) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

Backend active_backend() { return current(); }

void set_backend(Backend b) {
    if (b == Backend::Avx2 && !avx2_supported())
        throw std::invalid_argument("AVX2 kernel backend not available on this build/CPU");
    current() = b;
}

std::string backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

void add(const double* a, const double* b, double* out, std::size_t n) { active().add(a, b, out, n); }
void sub(const double* a, const double* b, double* out, std::size_t n) { active().sub(a, b, out, n); }
void mul(const double* a, const double* b, double* out, std::size_t n) { active().mul(a, b, out, n); }
void scale(const double* a, double s, double* out, std::size_t n) { active().scale(a, s, out, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
void relu(const double* x, double* out, std::size_t n) { active().relu(x, out, n); }
void relu_grad_accum(const double* x, const double* dy, double* dx, std::size_t n) {
    active().relu_grad_accum(x, dy, dx, n);
}
double sum(const double* x, std::size_t n) { return active().sum(x, n); }
double sumsq(const double* x, std::size_t n) { return active().sumsq(x, n); }
double asum(const double* x, std::size_t n) { return active().asum(x, n); }
void sgd_momentum(double* param, double* buf, const double* grad,
                  double lr, double momentum, double wd, std::size_t n) {
    active().sgd_momentum(param, buf, grad, lr, momentum, wd, n);
}
void sign_step_clamp(const double* x, const double* g, const double* x0,
                     double step, double eps, bool has_box, double lo,
                     double hi, double* out, std::size_t n) {
    active().sign_step_clamp(x, g, x0, step, eps, has_box, lo, hi, out, n);
}

void matmul(const double* a, const double* b, double* out,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    const Ops& ops = active();
    if (!accumulate) std::memset(out, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        double* out_row = out + i * n;
        const double* a_row = a + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) ops.axpy(a_row[kk], b + kk * n, out_row, n);
    }
}

void transpose(const double* a, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = a[r * cols + c];
}

}  // namespace des::kernels
