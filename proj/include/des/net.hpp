#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "des/rng.hpp"
#include "des/tensor.hpp"

// Fully-connected ReLU classifier with inverted dropout and a softmax head.
// Weights are row-major [fan_in x fan_out], so a batch forward is
// x[m,d] @ w + b per layer. All forward flavors share one code path; dropout
// enters only through explicit mask matrices supplied by the caller, which
// keeps every source of randomness outside the model.

namespace des {

struct Layer {
    std::size_t fan_in = 0, fan_out = 0;
    std::vector<double> w;  // fan_in x fan_out, row-major
    std::vector<double> b;  // fan_out
};

struct Mlp {
    std::vector<Layer> layers;
    double dropout_rate = 0.0;  // applied after each hidden ReLU

    std::size_t input_dim() const { return layers.front().fan_in; }
    std::size_t num_classes() const { return layers.back().fan_out; }
    std::size_t param_count() const;
};

/// He-uniform weights (limit sqrt(6/fan_in)), zero biases. One init stream,
/// consumed layer by layer in order.
Mlp make_mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden,
             std::size_t num_classes, double dropout_rate, std::uint64_t seed);

/// One inverted-dropout mask per hidden layer (entries 0 or 1/keep), drawn
/// row-major from rng. Empty when the net has no dropout.
std::vector<std::vector<double>> make_dropout_masks(const Mlp& net, std::size_t m, Rng& rng);

/// Plain batched forward to class probabilities (no tape). masks may be
/// empty (deterministic pass) or one mask per hidden layer.
void forward_probs(const Mlp& net, const double* x, std::size_t m,
                   const std::vector<std::vector<double>>& masks,
                   std::vector<double>& probs);
std::vector<double> forward_probs(const Mlp& net, const double* x, std::size_t m);

/// loss[i] = -log(max(probs[i, labels[i]], 1e-300))
void per_sample_losses(const std::vector<double>& probs, std::size_t num_classes,
                       const std::vector<int>& labels, std::vector<double>& out);

/// A forward pass recorded on a tape, ready for backward().
struct ForwardTape {
    Tape tape;
    TensorId x;
    std::vector<TensorId> w, b;  // one per layer
    TensorId logits, probs, loss;  // loss = mean cross-entropy, 1x1
};

ForwardTape build_forward(const Mlp& net, const double* x, std::size_t m,
                          const std::vector<int>& labels,
                          const std::vector<std::vector<double>>& masks,
                          bool x_requires_grad, bool params_require_grad);

/// Per-sample input gradients: row i of grad_x is the gradient of sample i's
/// own cross-entropy loss (not the batch mean) at x_i. Deterministic forward,
/// no dropout.
struct InputGradients {
    std::vector<double> grad_x;  // m x input_dim
    std::vector<double> probs;   // m x num_classes
    double mean_loss = 0.0;
};
InputGradients input_gradients(const Mlp& net, const double* x, std::size_t m,
                               const std::vector<int>& labels);

/// Gradients of the batch-mean loss w.r.t. every weight and bias.
struct ParamGradients {
    std::vector<std::vector<double>> w_grad, b_grad;
    std::vector<double> probs;
    double mean_loss = 0.0;
};
ParamGradients param_gradients(const Mlp& net, const double* x, std::size_t m,
                               const std::vector<int>& labels,
                               const std::vector<std::vector<double>>& masks);

/// `passes` stochastic forward passes; pass t draws its masks from
/// derive(seed, t). With dropout_rate == 0 no randomness is consumed and all
/// passes coincide. Returns one m*num_classes probability matrix per pass.
std::vector<std::vector<double>> mc_forward(const Mlp& net, const double* x, std::size_t m,
                                            std::size_t passes, std::uint64_t seed);

/// Binary model snapshot, explicit little-endian layout:
///   "DESM" | u32 version=1 | u32 n_layers |
///   per layer: u32 fan_in | u32 fan_out | f64 w[fan_in*fan_out] | f64 b[fan_out] |
///   f64 dropout_rate
/// Round-trips bit-exactly. Loading throws std::runtime_error on a bad
/// magic, unsupported version, or truncated file.
void save_checkpoint(const Mlp& net, const std::string& path);
Mlp load_checkpoint(const std::string& path);

}  // namespace des
