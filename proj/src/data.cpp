#include "des/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>

#include "des/fmt.hpp"

namespace des {

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
    if (n < 4 || n % 2 != 0)
        throw std::invalid_argument("two_moons: n must be even and >= 4, got " +
                                    std::to_string(n));
    if (!(noise >= 0.0)) throw std::invalid_argument("two_moons: noise must be >= 0");
    Dataset ds;
    ds.n = n;
    ds.d = 2;
    ds.k = 2;
    ds.x.resize(n * 2);
    ds.labels.resize(n);
    const std::size_t half = n / 2;
    Rng rng(derive(seed, kTagData));
    for (std::size_t i = 0; i < half; ++i) {
        const double t = std::numbers::pi * static_cast<double>(i) /
                         static_cast<double>(half - 1);
        // moon A on the unit circle, moon B its reflection shifted to (1, 0.5)
        double ax = std::cos(t), ay = std::sin(t);
        double bx = 1.0 - std::cos(t), by = 0.5 - std::sin(t);
        if (noise > 0.0) {
            ax += rng.normal(0.0, noise);
            ay += rng.normal(0.0, noise);
            bx += rng.normal(0.0, noise);
            by += rng.normal(0.0, noise);
        }
        ds.x[i * 2] = ax;
        ds.x[i * 2 + 1] = ay;
        ds.labels[i] = 0;
        ds.x[(half + i) * 2] = bx;
        ds.x[(half + i) * 2 + 1] = by;
        ds.labels[half + i] = 1;
    }
    return ds;
}

Dataset make_gaussian_blobs(std::size_t n, std::size_t k, double stddev, std::uint64_t seed,
                            const std::vector<std::vector<double>>& centers) {
    if (k < 2) throw std::invalid_argument("blobs: need at least 2 clusters");
    if (n == 0 || n % k != 0)
        throw std::invalid_argument("blobs: n must be a positive multiple of k");
    if (!(stddev > 0.0)) throw std::invalid_argument("blobs: stddev must be > 0");
    std::vector<std::vector<double>> c = centers;
    if (c.empty()) {
        if (k != 2)
            throw std::invalid_argument("blobs: default centers are for k == 2; pass centers");
        c = {{0.0, 0.0}, {1.0, 0.0}};
    }
    if (c.size() != k) throw std::invalid_argument("blobs: need one center per cluster");
    const std::size_t d = c[0].size();
    for (const auto& row : c)
        if (row.size() != d) throw std::invalid_argument("blobs: ragged centers");

    Dataset ds;
    ds.n = n;
    ds.d = d;
    ds.k = k;
    ds.x.resize(n * d);
    ds.labels.resize(n);
    const std::size_t per = n / k;
    Rng rng(derive(seed, kTagData));
    for (std::size_t cls = 0; cls < k; ++cls) {
        for (std::size_t i = 0; i < per; ++i) {
            const std::size_t row = cls * per + i;
            for (std::size_t j = 0; j < d; ++j)
                ds.x[row * d + j] = c[cls][j] + rng.normal(0.0, stddev);
            ds.labels[row] = static_cast<int>(cls);
        }
    }
    return ds;
}

namespace {

std::uint32_t get_u32_be(std::ifstream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw IdxFormatError(IdxFormatError::Kind::Truncated, "idx: truncated header in " + path);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit) {
    if (limit == 0) throw std::invalid_argument("load_idx: limit must be positive");

    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IdxFormatError(IdxFormatError::Kind::Truncated,
                                    "idx: cannot open " + images_path);
    if (get_u32_be(imgs, images_path) != 0x00000803u)
        throw IdxFormatError(IdxFormatError::Kind::BadMagic,
                             "idx: " + images_path + " is not an idx3-ubyte image file");
    const std::uint32_t n_images = get_u32_be(imgs, images_path);
    const std::uint32_t rows = get_u32_be(imgs, images_path);
    const std::uint32_t cols = get_u32_be(imgs, images_path);

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw IdxFormatError(IdxFormatError::Kind::Truncated,
                                    "idx: cannot open " + labels_path);
    if (get_u32_be(labs, labels_path) != 0x00000801u)
        throw IdxFormatError(IdxFormatError::Kind::BadMagic,
                             "idx: " + labels_path + " is not an idx1-ubyte label file");
    const std::uint32_t n_labels = get_u32_be(labs, labels_path);

    if (n_images != n_labels)
        throw IdxFormatError(IdxFormatError::Kind::CountMismatch,
                             "idx: " + std::to_string(n_images) + " images vs " +
                                 std::to_string(n_labels) + " labels");

    const std::size_t n = std::min<std::size_t>(limit, n_images);
    const std::size_t d = static_cast<std::size_t>(rows) * cols;
    if (n == 0 || d == 0)
        throw IdxFormatError(IdxFormatError::Kind::Truncated, "idx: empty image file");

    Dataset ds;
    ds.n = n;
    ds.d = d;
    ds.x.resize(n * d);
    ds.labels.resize(n);
    ds.has_box = true;
    ds.box_lo = 0.0;
    ds.box_hi = 1.0;

    std::vector<unsigned char> buf(d);
    for (std::size_t i = 0; i < n; ++i) {
        if (!imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(d)))
            throw IdxFormatError(IdxFormatError::Kind::Truncated,
                                 "idx: " + images_path + " truncated at image " +
                                     std::to_string(i));
        for (std::size_t j = 0; j < d; ++j)
            ds.x[i * d + j] = static_cast<double>(buf[j]) / 255.0;
    }
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char l;
        if (!labs.read(reinterpret_cast<char*>(&l), 1))
            throw IdxFormatError(IdxFormatError::Kind::Truncated,
                                 "idx: " + labels_path + " truncated at label " +
                                     std::to_string(i));
        ds.labels[i] = static_cast<int>(l);
        max_label = std::max(max_label, static_cast<int>(l));
    }
    ds.k = static_cast<std::size_t>(max_label) + 1;
    if (ds.k < 2) throw std::invalid_argument("load_idx: need at least 2 classes, got 1");
    return ds;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng) {
    if (n == 0) throw std::invalid_argument("make_batches: empty dataset");
    if (batch_size == 0) throw std::invalid_argument("make_batches: batch size must be > 0");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = rng.uniform_index(i + 1);
        std::swap(perm[i], perm[j]);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                             perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Batch b;
    b.x.resize(indices.size() * ds.d);
    b.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        if (src >= ds.n) throw std::out_of_range("gather: index out of range");
        std::copy(ds.x.begin() + static_cast<std::ptrdiff_t>(src * ds.d),
                  ds.x.begin() + static_cast<std::ptrdiff_t>((src + 1) * ds.d),
                  b.x.begin() + static_cast<std::ptrdiff_t>(i * ds.d));
        b.labels[i] = ds.labels[src];
    }
    return b;
}

void write_dataset_csv(std::ostream& os, const Dataset& ds) {
    for (std::size_t j = 0; j < ds.d; ++j) os << 'x' << j << ',';
    os << "label\n";
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.d; ++j) os << fmt(ds.x[i * ds.d + j]) << ',';
        os << ds.labels[i] << '\n';
    }
}

}  // namespace des
