#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

// Reverse-mode autodiff on a flat tape of row-major double matrices. A Tape
// owns every tensor it creates; TensorId is a cheap handle into it. Nodes are
// recorded in creation order and backward() sweeps them in reverse, so one
// forward build + one backward call yields exact gradients with a
// deterministic, bit-reproducible accumulation order.

namespace des {

struct TensorId {
    std::uint32_t index = UINT32_MAX;
    bool valid() const { return index != UINT32_MAX; }
};

class Tape {
public:
    /// New tensor with no parents, zero-initialized.
    TensorId leaf(std::size_t rows, std::size_t cols, bool requires_grad = false);

    // Elementwise (shapes must match).
    TensorId add(TensorId a, TensorId b);
    TensorId sub(TensorId a, TensorId b);
    TensorId mul(TensorId a, TensorId b);
    /// s * a
    TensorId scale(TensorId a, double s);
    TensorId relu(TensorId a);
    /// Sum of all entries -> 1x1.
    TensorId sum(TensorId a);
    /// [m,k] x [k,n] -> [m,n].
    TensorId matmul(TensorId a, TensorId b);
    /// a[r,c] + bias[0,c]; bias must be 1 x a.cols.
    TensorId add_rowvec(TensorId a, TensorId bias);
    /// Row-wise softmax with max subtraction. Throws std::domain_error on a
    /// non-finite input entry.
    TensorId softmax(TensorId a);
    /// Mean over rows of -log(max(p[r, labels[r]], 1e-300)) -> 1x1.
    /// Throws std::out_of_range on a bad label, std::invalid_argument on a
    /// label-count mismatch.
    TensorId cross_entropy(TensorId probs, const std::vector<int>& labels);

    /// Reverse sweep from a 1x1 root that requires grad. Clears all gradient
    /// buffers, seeds the root with 1, then visits nodes newest-to-oldest.
    void backward(TensorId root);

    double* data(TensorId id);
    const double* data(TensorId id) const;
    /// Gradient buffer; null until the tensor participates in a backward().
    const double* grad(TensorId id) const;
    std::size_t rows(TensorId id) const;
    std::size_t cols(TensorId id) const;
    std::size_t size(TensorId id) const;
    bool requires_grad(TensorId id) const;
    /// Value of a 1x1 tensor.
    double value(TensorId id) const;

    std::size_t node_count() const { return slots_.size(); }

private:
    enum class Op : std::uint8_t {
        Leaf, Add, Sub, Mul, Scale, Relu, Sum, Matmul, AddRowVec, Softmax, CrossEntropy
    };

    struct Slot {
        std::size_t rows = 0, cols = 0;
        std::vector<double> data;
        std::vector<double> grad;  // sized iff requires_grad
        bool requires_grad = false;
        Op op = Op::Leaf;
        TensorId a, b;
        double alpha = 0.0;       // Scale factor
        std::vector<int> labels;  // CrossEntropy targets
    };

    Slot& at(TensorId id);
    const Slot& at(TensorId id) const;
    TensorId push(std::size_t rows, std::size_t cols, bool requires_grad, Op op,
                  TensorId a = {}, TensorId b = {});
    void check_same_shape(TensorId a, TensorId b, const char* what) const;
    void backward_node(std::uint32_t i);

    std::vector<Slot> slots_;
};

}  // namespace des
