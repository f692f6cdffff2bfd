#include "des/kernels.hpp"

#if defined(DES_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

// AVX2 kernels, 4 doubles per lane. Elementwise kernels deliberately avoid
// FMA so they match the scalar reference bitwise; reductions keep 4 partial
// sums and fold them at the end.

namespace des::kernels {
namespace {

inline double hsum(__m256d v) {
    // ((l0+l1)+(l2+l3)) — fixed fold order
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s01 = _mm_hadd_pd(lo, lo);
    const __m128d s23 = _mm_hadd_pd(hi, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s01, s23));
}

void k_add(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void k_scale(const double* a, double s, double* out, std::size_t n) {
    const __m256d sv = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(sv, _mm256_loadu_pd(a + i)));
    }
    for (; i < n; ++i) out[i] = s * a[i];
}

void k_axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void k_relu(const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // max_pd(x, 0) == (x > 0) ? x : 0
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void k_relu_grad_accum(const double* x, const double* dy, double* dx, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d gated = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gated));
    }
    for (; i < n; ++i) dx[i] = dx[i] + (x[i] > 0.0 ? dy[i] : 0.0);
}

double k_sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

double k_sumsq(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i] * x[i];
    return r;
}

double k_asum(const double* x, std::size_t n) {
    const __m256d signbit = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_andnot_pd(signbit, _mm256_loadu_pd(x + i)));
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += std::fabs(x[i]);
    return r;
}

void k_sgd_momentum(double* param, double* buf, const double* grad,
                    double lr, double momentum, double wd, std::size_t n) {
    const __m256d mv = _mm256_set1_pd(momentum);
    const __m256d wdv = _mm256_set1_pd(wd);
    const __m256d lrv = _mm256_set1_pd(lr);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d p = _mm256_loadu_pd(param + i);
        const __m256d g = _mm256_loadu_pd(grad + i);
        const __m256d b0 = _mm256_loadu_pd(buf + i);
        // momentum*buf + (grad + wd*param), same association as scalar
        const __m256d b = _mm256_add_pd(_mm256_mul_pd(mv, b0),
                                        _mm256_add_pd(g, _mm256_mul_pd(wdv, p)));
        _mm256_storeu_pd(buf + i, b);
        _mm256_storeu_pd(param + i, _mm256_sub_pd(p, _mm256_mul_pd(lrv, b)));
    }
    for (; i < n; ++i) {
        const double b = momentum * buf[i] + (grad[i] + wd * param[i]);
        buf[i] = b;
        param[i] = param[i] - lr * b;
    }
}

void k_sign_step_clamp(const double* x, const double* g, const double* x0,
                       double step, double eps, bool has_box, double lo,
                       double hi, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d stepv = _mm256_set1_pd(step);
    const __m256d epsv = _mm256_set1_pd(eps);
    const __m256d lov = _mm256_set1_pd(lo);
    const __m256d hiv = _mm256_set1_pd(hi);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        const __m256d pos = _mm256_and_pd(_mm256_cmp_pd(gv, zero, _CMP_GT_OQ), one);
        const __m256d neg = _mm256_and_pd(_mm256_cmp_pd(gv, zero, _CMP_LT_OQ), one);
        const __m256d sgn = _mm256_sub_pd(pos, neg);
        __m256d v = _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_mul_pd(stepv, sgn));
        const __m256d base = _mm256_loadu_pd(x0 + i);
        v = _mm256_max_pd(v, _mm256_sub_pd(base, epsv));
        v = _mm256_min_pd(v, _mm256_add_pd(base, epsv));
        if (has_box) {
            v = _mm256_max_pd(v, lov);
            v = _mm256_min_pd(v, hiv);
        }
        _mm256_storeu_pd(out + i, v);
    }
    for (; i < n; ++i) {
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

const Ops& avx2_ops() {
    static const Ops ops{k_add,  k_sub,   k_mul,  k_scale, k_axpy,
                         k_relu, k_relu_grad_accum, k_sum, k_sumsq, k_asum,
                         k_sgd_momentum, k_sign_step_clamp};
    return ops;
}

}  // namespace des::kernels

#endif  // DES_HAVE_AVX2
