#pragma once

#include <cstddef>
#include <string>

// Double-precision inner-loop kernels. Every kernel has a scalar reference
// implementation and, on x86-64, an AVX2 variant. The active backend is picked
// once at startup (cpuid probe, overridable via the DES_KERNELS environment
// variable or set_backend) and stays fixed for the lifetime of the process so
// results are reproducible run to run.
//
// Elementwise kernels are bit-identical across backends: both variants perform
// the same IEEE operations per element in the same order and FMA contraction
// is disabled for these translation units. Reductions (sum, sumsq, asum) use
// lane accumulators under AVX2 and may differ from the scalar reference in the
// last few ulps.

namespace des::kernels {

enum class Backend { Scalar, Avx2 };

/// Kernel function table for one backend.
struct Ops {
    // out[i] = a[i] (+|-|*) b[i]
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = s * a[i]
    void (*scale)(const double* a, double s, double* out, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // out[i] = x[i] > 0 ? x[i] : 0
    void (*relu)(const double* x, double* out, std::size_t n);
    // dx[i] += x[i] > 0 ? dy[i] : 0   (derivative at 0 is 0)
    void (*relu_grad_accum)(const double* x, const double* dy, double* dx, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    double (*sumsq)(const double* x, std::size_t n);
    double (*asum)(const double* x, std::size_t n);
    // buf = momentum*buf + grad + wd*param;  param -= lr*buf
    void (*sgd_momentum)(double* param, double* buf, const double* grad,
                         double lr, double momentum, double wd, std::size_t n);
    // out[i] = clamp(x[i] + step*sign(g[i]), x0[i]-eps, x0[i]+eps), then the
    // optional [lo,hi] box. sign(0) = 0.
    void (*sign_step_clamp)(const double* x, const double* g, const double* x0,
                            double step, double eps, bool has_box, double lo,
                            double hi, double* out, std::size_t n);
};

const Ops& scalar_ops();
#if defined(DES_HAVE_AVX2)
const Ops& avx2_ops();
#endif

bool avx2_supported();
Backend active_backend();
/// Force a backend. Throws std::invalid_argument if unsupported on this CPU.
void set_backend(Backend b);
std::string backend_name(Backend b);

// Dispatched entry points (route through the active backend).
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void relu(const double* x, double* out, std::size_t n);
void relu_grad_accum(const double* x, const double* dy, double* dx, std::size_t n);
double sum(const double* x, std::size_t n);
double sumsq(const double* x, std::size_t n);
double asum(const double* x, std::size_t n);
void sgd_momentum(double* param, double* buf, const double* grad,
                  double lr, double momentum, double wd, std::size_t n);
void sign_step_clamp(const double* x, const double* g, const double* x0,
                     double step, double eps, bool has_box, double lo,
                     double hi, double* out, std::size_t n);

// Row-major matmul driver: out[m,n] = a[m,k] * b[k,n], built on axpy so the
// accumulation order (and therefore the result) is identical across backends.
// With accumulate=true, adds into out instead of overwriting it.
void matmul(const double* a, const double* b, double* out,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void transpose(const double* a, double* out, std::size_t rows, std::size_t cols);

}  // namespace des::kernels
