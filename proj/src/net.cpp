#include "des/net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "des/kernels.hpp"

namespace des {

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.w.size() + l.b.size();
    return n;
}

Mlp make_mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden,
             std::size_t num_classes, double dropout_rate, std::uint64_t seed) {
    if (in_dim == 0) throw std::invalid_argument("make_mlp: input dim must be positive");
    if (num_classes < 2) throw std::invalid_argument("make_mlp: need at least 2 classes");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw std::invalid_argument("make_mlp: dropout rate must be in [0, 1)");
    for (std::size_t h : hidden)
        if (h == 0) throw std::invalid_argument("make_mlp: hidden width must be positive");

    Mlp net;
    net.dropout_rate = dropout_rate;
    Rng rng(derive(seed, kTagInit));
    std::size_t prev = in_dim;
    std::vector<std::size_t> outs(hidden);
    outs.push_back(num_classes);
    for (std::size_t fan_out : outs) {
        Layer l;
        l.fan_in = prev;
        l.fan_out = fan_out;
        l.w.resize(prev * fan_out);
        l.b.assign(fan_out, 0.0);
        const double limit = std::sqrt(6.0 / static_cast<double>(prev));
        for (double& v : l.w) v = rng.uniform(-limit, limit);
        net.layers.push_back(std::move(l));
        prev = fan_out;
    }
    return net;
}

std::vector<std::vector<double>> make_dropout_masks(const Mlp& net, std::size_t m, Rng& rng) {
    std::vector<std::vector<double>> masks;
    if (net.dropout_rate <= 0.0) return masks;
    const double keep = 1.0 - net.dropout_rate;
    const double inv_keep = 1.0 / keep;
    masks.reserve(net.layers.size() - 1);
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
        std::vector<double> mask(m * net.layers[l].fan_out);
        for (double& v : mask) v = rng.uniform01() < keep ? inv_keep : 0.0;
        masks.push_back(std::move(mask));
    }
    return masks;
}

namespace {

void check_masks(const Mlp& net, std::size_t m,
                 const std::vector<std::vector<double>>& masks) {
    if (masks.empty()) return;
    if (masks.size() != net.layers.size() - 1)
        throw std::invalid_argument("forward: expected one dropout mask per hidden layer");
    for (std::size_t l = 0; l < masks.size(); ++l)
        if (masks[l].size() != m * net.layers[l].fan_out)
            throw std::invalid_argument("forward: dropout mask shape mismatch at layer " +
                                        std::to_string(l));
}

void softmax_rows(const double* z, double* p, std::size_t m, std::size_t k) {
    for (std::size_t i = 0; i < m * k; ++i)
        if (!std::isfinite(z[i]))
            throw std::domain_error("softmax: non-finite logit at row " +
                                    std::to_string(i / k));
    for (std::size_t r = 0; r < m; ++r) {
        const double* zr = z + r * k;
        double mx = zr[0];
        for (std::size_t j = 1; j < k; ++j) mx = zr[j] > mx ? zr[j] : mx;
        double* pr = p + r * k;
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            pr[j] = std::exp(zr[j] - mx);
            s += pr[j];
        }
        for (std::size_t j = 0; j < k; ++j) pr[j] /= s;
    }
}

}  // namespace

void forward_probs(const Mlp& net, const double* x, std::size_t m,
                   const std::vector<std::vector<double>>& masks,
                   std::vector<double>& probs) {
    check_masks(net, m, masks);
    std::vector<double> cur(x, x + m * net.input_dim());
    std::vector<double> next;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& lay = net.layers[l];
        next.resize(m * lay.fan_out);
        kernels::matmul(cur.data(), lay.w.data(), next.data(), m, lay.fan_in, lay.fan_out);
        for (std::size_t r = 0; r < m; ++r)
            kernels::add(next.data() + r * lay.fan_out, lay.b.data(),
                         next.data() + r * lay.fan_out, lay.fan_out);
        if (l + 1 < net.layers.size()) {
            kernels::relu(next.data(), next.data(), next.size());
            if (!masks.empty())
                kernels::mul(next.data(), masks[l].data(), next.data(), next.size());
        }
        cur.swap(next);
    }
    probs.resize(m * net.num_classes());
    softmax_rows(cur.data(), probs.data(), m, net.num_classes());
}

std::vector<double> forward_probs(const Mlp& net, const double* x, std::size_t m) {
    std::vector<double> probs;
    forward_probs(net, x, m, {}, probs);
    return probs;
}

void per_sample_losses(const std::vector<double>& probs, std::size_t num_classes,
                       const std::vector<int>& labels, std::vector<double>& out) {
    if (probs.size() != labels.size() * num_classes)
        throw std::invalid_argument("per_sample_losses: probs/labels size mismatch");
    out.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
            throw std::out_of_range("per_sample_losses: label out of range at row " +
                                    std::to_string(i));
        const double p = probs[i * num_classes + static_cast<std::size_t>(labels[i])];
        out[i] = -std::log(p > 1e-300 ? p : 1e-300);
    }
}

ForwardTape build_forward(const Mlp& net, const double* x, std::size_t m,
                          const std::vector<int>& labels,
                          const std::vector<std::vector<double>>& masks,
                          bool x_requires_grad, bool params_require_grad) {
    check_masks(net, m, masks);
    ForwardTape ft;
    Tape& t = ft.tape;
    ft.x = t.leaf(m, net.input_dim(), x_requires_grad);
    std::memcpy(t.data(ft.x), x, m * net.input_dim() * sizeof(double));

    TensorId h = ft.x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& lay = net.layers[l];
        TensorId w = t.leaf(lay.fan_in, lay.fan_out, params_require_grad);
        std::memcpy(t.data(w), lay.w.data(), lay.w.size() * sizeof(double));
        TensorId b = t.leaf(1, lay.fan_out, params_require_grad);
        std::memcpy(t.data(b), lay.b.data(), lay.b.size() * sizeof(double));
        ft.w.push_back(w);
        ft.b.push_back(b);
        h = t.add_rowvec(t.matmul(h, w), b);
        if (l + 1 < net.layers.size()) {
            h = t.relu(h);
            if (!masks.empty()) {
                TensorId mask = t.leaf(m, lay.fan_out, false);
                std::memcpy(t.data(mask), masks[l].data(), masks[l].size() * sizeof(double));
                h = t.mul(h, mask);
            }
        }
    }
    ft.logits = h;
    ft.probs = t.softmax(h);
    ft.loss = t.cross_entropy(ft.probs, labels);
    return ft;
}

InputGradients input_gradients(const Mlp& net, const double* x, std::size_t m,
                               const std::vector<int>& labels) {
    ForwardTape ft = build_forward(net, x, m, labels, {}, /*x_requires_grad=*/true,
                                   /*params_require_grad=*/false);
    // mean loss scaled by m: the input gradient of the scaled loss is each
    // sample's own loss gradient
    TensorId scaled = ft.tape.scale(ft.loss, static_cast<double>(m));
    ft.tape.backward(scaled);
    InputGradients out;
    const double* g = ft.tape.grad(ft.x);
    out.grad_x.assign(g, g + m * net.input_dim());
    const double* p = ft.tape.data(ft.probs);
    out.probs.assign(p, p + m * net.num_classes());
    out.mean_loss = ft.tape.value(ft.loss);
    return out;
}

ParamGradients param_gradients(const Mlp& net, const double* x, std::size_t m,
                               const std::vector<int>& labels,
                               const std::vector<std::vector<double>>& masks) {
    ForwardTape ft = build_forward(net, x, m, labels, masks, /*x_requires_grad=*/false,
                                   /*params_require_grad=*/true);
    ft.tape.backward(ft.loss);
    ParamGradients out;
    out.w_grad.resize(net.layers.size());
    out.b_grad.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const double* gw = ft.tape.grad(ft.w[l]);
        const double* gb = ft.tape.grad(ft.b[l]);
        out.w_grad[l].assign(gw, gw + net.layers[l].w.size());
        out.b_grad[l].assign(gb, gb + net.layers[l].b.size());
    }
    const double* p = ft.tape.data(ft.probs);
    out.probs.assign(p, p + m * net.num_classes());
    out.mean_loss = ft.tape.value(ft.loss);
    return out;
}

std::vector<std::vector<double>> mc_forward(const Mlp& net, const double* x, std::size_t m,
                                            std::size_t passes, std::uint64_t seed) {
    if (passes == 0) throw std::invalid_argument("mc_forward: need at least one pass");
    std::vector<std::vector<double>> out(passes);
    for (std::size_t t = 0; t < passes; ++t) {
        std::vector<std::vector<double>> masks;
        if (net.dropout_rate > 0.0) {
            Rng rng(derive(seed, t));
            masks = make_dropout_masks(net, m, rng);
        }
        forward_probs(net, x, m, masks, out[t]);
    }
    return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double d) {
    const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

constexpr char kMagic[4] = {'D', 'E', 'S', 'M'};

}  // namespace

void save_checkpoint(const Mlp& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 4);
    put_u32(os, 1);  // version
    put_u32(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const Layer& l : net.layers) {
        put_u32(os, static_cast<std::uint32_t>(l.fan_in));
        put_u32(os, static_cast<std::uint32_t>(l.fan_out));
        for (double v : l.w) put_f64(os, v);
        for (double v : l.b) put_f64(os, v);
    }
    put_f64(os, net.dropout_rate);
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Mlp load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4)) throw std::runtime_error("checkpoint: truncated file");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const std::uint32_t version = get_u32(is);
    if (version != 1)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const std::uint32_t n_layers = get_u32(is);
    if (n_layers == 0) throw std::runtime_error("checkpoint: zero layers");
    Mlp net;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        Layer lay;
        lay.fan_in = get_u32(is);
        lay.fan_out = get_u32(is);
        if (lay.fan_in == 0 || lay.fan_out == 0)
            throw std::runtime_error("checkpoint: zero layer dimension");
        lay.w.resize(lay.fan_in * lay.fan_out);
        for (double& v : lay.w) v = get_f64(is);
        lay.b.resize(lay.fan_out);
        for (double& v : lay.b) v = get_f64(is);
        net.layers.push_back(std::move(lay));
    }
    net.dropout_rate = get_f64(is);
    return net;
}

}  // namespace des
