#include "des/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "des/kernels.hpp"

namespace des {

namespace {
constexpr double kProbFloor = 1e-300;  // keeps log / division finite
}

Tape::Slot& Tape::at(TensorId id) {
    if (!id.valid() || id.index >= slots_.size())
        throw std::invalid_argument("tape: invalid tensor handle");
    return slots_[id.index];
}

const Tape::Slot& Tape::at(TensorId id) const {
    if (!id.valid() || id.index >= slots_.size())
        throw std::invalid_argument("tape: invalid tensor handle");
    return slots_[id.index];
}

TensorId Tape::push(std::size_t rows, std::size_t cols, bool requires_grad, Op op,
                    TensorId a, TensorId b) {
    Slot s;
    s.rows = rows;
    s.cols = cols;
    s.data.assign(rows * cols, 0.0);
    s.requires_grad = requires_grad;
    if (requires_grad) s.grad.assign(rows * cols, 0.0);
    s.op = op;
    s.a = a;
    s.b = b;
    slots_.push_back(std::move(s));
    return TensorId{static_cast<std::uint32_t>(slots_.size() - 1)};
}

void Tape::check_same_shape(TensorId a, TensorId b, const char* what) const {
    const Slot& sa = at(a);
    const Slot& sb = at(b);
    if (sa.rows != sb.rows || sa.cols != sb.cols)
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                    std::to_string(sa.rows) + "x" + std::to_string(sa.cols) +
                                    " vs " + std::to_string(sb.rows) + "x" +
                                    std::to_string(sb.cols) + ")");
}

TensorId Tape::leaf(std::size_t rows, std::size_t cols, bool requires_grad) {
    return push(rows, cols, requires_grad, Op::Leaf);
}

TensorId Tape::add(TensorId a, TensorId b) {
    check_same_shape(a, b, "add");
    const bool rg = at(a).requires_grad || at(b).requires_grad;
    TensorId out = push(at(a).rows, at(a).cols, rg, Op::Add, a, b);
    kernels::add(at(a).data.data(), at(b).data.data(), at(out).data.data(), at(out).data.size());
    return out;
}

TensorId Tape::sub(TensorId a, TensorId b) {
    check_same_shape(a, b, "sub");
    const bool rg = at(a).requires_grad || at(b).requires_grad;
    TensorId out = push(at(a).rows, at(a).cols, rg, Op::Sub, a, b);
    kernels::sub(at(a).data.data(), at(b).data.data(), at(out).data.data(), at(out).data.size());
    return out;
}

TensorId Tape::mul(TensorId a, TensorId b) {
    check_same_shape(a, b, "mul");
    const bool rg = at(a).requires_grad || at(b).requires_grad;
    TensorId out = push(at(a).rows, at(a).cols, rg, Op::Mul, a, b);
    kernels::mul(at(a).data.data(), at(b).data.data(), at(out).data.data(), at(out).data.size());
    return out;
}

TensorId Tape::scale(TensorId a, double s) {
    TensorId out = push(at(a).rows, at(a).cols, at(a).requires_grad, Op::Scale, a);
    at(out).alpha = s;
    kernels::scale(at(a).data.data(), s, at(out).data.data(), at(out).data.size());
    return out;
}

TensorId Tape::relu(TensorId a) {
    TensorId out = push(at(a).rows, at(a).cols, at(a).requires_grad, Op::Relu, a);
    kernels::relu(at(a).data.data(), at(out).data.data(), at(out).data.size());
    return out;
}

TensorId Tape::sum(TensorId a) {
    TensorId out = push(1, 1, at(a).requires_grad, Op::Sum, a);
    at(out).data[0] = kernels::sum(at(a).data.data(), at(a).data.size());
    return out;
}

TensorId Tape::matmul(TensorId a, TensorId b) {
    const Slot& sa = at(a);
    const Slot& sb = at(b);
    if (sa.cols != sb.rows)
        throw std::invalid_argument("matmul: inner dimensions differ (" +
                                    std::to_string(sa.cols) + " vs " + std::to_string(sb.rows) +
                                    ")");
    const bool rg = sa.requires_grad || sb.requires_grad;
    TensorId out = push(sa.rows, sb.cols, rg, Op::Matmul, a, b);
    kernels::matmul(at(a).data.data(), at(b).data.data(), at(out).data.data(),
                    at(a).rows, at(a).cols, at(b).cols);
    return out;
}

TensorId Tape::add_rowvec(TensorId a, TensorId bias) {
    const Slot& sa = at(a);
    const Slot& sv = at(bias);
    if (sv.rows != 1 || sv.cols != sa.cols)
        throw std::invalid_argument("add_rowvec: bias must be 1x" + std::to_string(sa.cols));
    const bool rg = sa.requires_grad || sv.requires_grad;
    TensorId out = push(sa.rows, sa.cols, rg, Op::AddRowVec, a, bias);
    Slot& so = at(out);
    const double* av = at(a).data.data();
    const double* bv = at(bias).data.data();
    for (std::size_t r = 0; r < so.rows; ++r)
        kernels::add(av + r * so.cols, bv, so.data.data() + r * so.cols, so.cols);
    return out;
}

TensorId Tape::softmax(TensorId a) {
    const Slot& sa = at(a);
    for (std::size_t i = 0; i < sa.data.size(); ++i) {
        if (!std::isfinite(sa.data[i]))
            throw std::domain_error("softmax: non-finite input at row " +
                                    std::to_string(i / sa.cols) + ", col " +
                                    std::to_string(i % sa.cols));
    }
    TensorId out = push(sa.rows, sa.cols, sa.requires_grad, Op::Softmax, a);
    Slot& so = at(out);
    const std::size_t K = so.cols;
    const double* z = at(a).data.data();
    for (std::size_t r = 0; r < so.rows; ++r) {
        const double* zr = z + r * K;
        double m = zr[0];
        for (std::size_t j = 1; j < K; ++j) m = zr[j] > m ? zr[j] : m;
        double* pr = so.data.data() + r * K;
        double s = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            pr[j] = std::exp(zr[j] - m);
            s += pr[j];
        }
        for (std::size_t j = 0; j < K; ++j) pr[j] /= s;
    }
    return out;
}

TensorId Tape::cross_entropy(TensorId probs, const std::vector<int>& labels) {
    const Slot& sp = at(probs);
    if (labels.size() != sp.rows)
        throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(sp.rows) + " rows");
    const std::size_t K = sp.cols;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= K)
            throw std::out_of_range("cross_entropy: label " + std::to_string(labels[r]) +
                                    " out of range [0," + std::to_string(K) + ") at row " +
                                    std::to_string(r));
    }
    TensorId out = push(1, 1, sp.requires_grad, Op::CrossEntropy, probs);
    Slot& so = at(out);
    so.labels = labels;
    const double* p = at(probs).data.data();
    double acc = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const double py = p[r * K + static_cast<std::size_t>(labels[r])];
        acc += -std::log(py > kProbFloor ? py : kProbFloor);
    }
    so.data[0] = acc / static_cast<double>(labels.size());
    return out;
}

void Tape::backward(TensorId root) {
    const Slot& sr = at(root);
    if (sr.rows != 1 || sr.cols != 1)
        throw std::invalid_argument("backward: root must be 1x1, got " +
                                    std::to_string(sr.rows) + "x" + std::to_string(sr.cols));
    if (!sr.requires_grad)
        throw std::invalid_argument("backward: root does not require grad");
    for (Slot& s : slots_)
        if (s.requires_grad) std::fill(s.grad.begin(), s.grad.end(), 0.0);
    at(root).grad[0] = 1.0;
    for (std::uint32_t i = root.index + 1; i-- > 0;) backward_node(i);
}

void Tape::backward_node(std::uint32_t i) {
    Slot& s = slots_[i];
    if (!s.requires_grad || s.op == Op::Leaf) return;
    const double* dy = s.grad.data();
    const std::size_t n = s.data.size();
    Slot& sa = slots_[s.a.index];
    switch (s.op) {
        case Op::Add: {
            if (sa.requires_grad) kernels::axpy(1.0, dy, sa.grad.data(), n);
            Slot& sb = slots_[s.b.index];
            if (sb.requires_grad) kernels::axpy(1.0, dy, sb.grad.data(), n);
            break;
        }
        case Op::Sub: {
            if (sa.requires_grad) kernels::axpy(1.0, dy, sa.grad.data(), n);
            Slot& sb = slots_[s.b.index];
            if (sb.requires_grad) kernels::axpy(-1.0, dy, sb.grad.data(), n);
            break;
        }
        case Op::Mul: {
            Slot& sb = slots_[s.b.index];
            if (sa.requires_grad) {
                double* ga = sa.grad.data();
                const double* bv = sb.data.data();
                for (std::size_t j = 0; j < n; ++j) ga[j] += dy[j] * bv[j];
            }
            if (sb.requires_grad) {
                double* gb = sb.grad.data();
                const double* av = sa.data.data();
                for (std::size_t j = 0; j < n; ++j) gb[j] += dy[j] * av[j];
            }
            break;
        }
        case Op::Scale:
            if (sa.requires_grad) kernels::axpy(s.alpha, dy, sa.grad.data(), n);
            break;
        case Op::Relu:
            if (sa.requires_grad)
                kernels::relu_grad_accum(sa.data.data(), dy, sa.grad.data(), n);
            break;
        case Op::Sum: {
            if (sa.requires_grad) {
                double* ga = sa.grad.data();
                const double g0 = dy[0];
                for (std::size_t j = 0; j < sa.data.size(); ++j) ga[j] += g0;
            }
            break;
        }
        case Op::Matmul: {
            Slot& sb = slots_[s.b.index];
            const std::size_t m = sa.rows, k = sa.cols, nn = sb.cols;
            if (sa.requires_grad) {
                std::vector<double> bT(nn * k);
                kernels::transpose(sb.data.data(), bT.data(), k, nn);
                kernels::matmul(dy, bT.data(), sa.grad.data(), m, nn, k, /*accumulate=*/true);
            }
            if (sb.requires_grad) {
                std::vector<double> aT(k * m);
                kernels::transpose(sa.data.data(), aT.data(), m, k);
                kernels::matmul(aT.data(), dy, sb.grad.data(), k, m, nn, /*accumulate=*/true);
            }
            break;
        }
        case Op::AddRowVec: {
            Slot& sb = slots_[s.b.index];
            if (sa.requires_grad) kernels::axpy(1.0, dy, sa.grad.data(), n);
            if (sb.requires_grad) {
                double* gb = sb.grad.data();
                for (std::size_t r = 0; r < s.rows; ++r)
                    kernels::axpy(1.0, dy + r * s.cols, gb, s.cols);
            }
            break;
        }
        case Op::Softmax: {
            if (sa.requires_grad) {
                const std::size_t K = s.cols;
                const double* p = s.data.data();
                double* ga = sa.grad.data();
                for (std::size_t r = 0; r < s.rows; ++r) {
                    const double* pr = p + r * K;
                    const double* gr = dy + r * K;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < K; ++j) dot += gr[j] * pr[j];
                    double* gar = ga + r * K;
                    for (std::size_t j = 0; j < K; ++j) gar[j] += pr[j] * (gr[j] - dot);
                }
            }
            break;
        }
        case Op::CrossEntropy: {
            if (sa.requires_grad) {
                const std::size_t K = sa.cols;
                const double g0 = dy[0];
                const double inv_n = 1.0 / static_cast<double>(s.labels.size());
                const double* p = sa.data.data();
                double* ga = sa.grad.data();
                for (std::size_t r = 0; r < s.labels.size(); ++r) {
                    const std::size_t j = r * K + static_cast<std::size_t>(s.labels[r]);
                    const double py = p[j] > kProbFloor ? p[j] : kProbFloor;
                    ga[j] += g0 * (-inv_n) / py;
                }
            }
            break;
        }
        case Op::Leaf:
            break;
    }
}

double* Tape::data(TensorId id) { return at(id).data.data(); }
const double* Tape::data(TensorId id) const { return at(id).data.data(); }

const double* Tape::grad(TensorId id) const {
    const Slot& s = at(id);
    return s.requires_grad ? s.grad.data() : nullptr;
}

std::size_t Tape::rows(TensorId id) const { return at(id).rows; }
std::size_t Tape::cols(TensorId id) const { return at(id).cols; }
std::size_t Tape::size(TensorId id) const { return at(id).data.size(); }
bool Tape::requires_grad(TensorId id) const { return at(id).requires_grad; }

double Tape::value(TensorId id) const {
    const Slot& s = at(id);
    if (s.rows != 1 || s.cols != 1)
        throw std::invalid_argument("value: tensor is not 1x1");
    return s.data[0];
}

}  // namespace des
