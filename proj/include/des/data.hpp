#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "des/rng.hpp"

namespace des {

struct Dataset {
    std::vector<double> x;    // n x d, row-major
    std::vector<int> labels;  // n
    std::size_t n = 0, d = 0, k = 0;
    // natural input range, when the features have one (e.g. pixels in [0,1])
    bool has_box = false;
    double box_lo = 0.0, box_hi = 1.0;
};

/// Two interleaved half-circles of radius 1: moon A (cos t, sin t) labeled 0
/// and moon B (1 - cos t, 0.5 - sin t) labeled 1, t evenly spaced over
/// [0, pi], n/2 points each, plus N(0, noise^2) on both coordinates. n must
/// be even and >= 4. With noise 0 no randomness is consumed and moon A lies
/// on the unit circle to full precision.
Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed);

/// k isotropic Gaussian clusters, n/k points each (n % k == 0). Default
/// centers (0,0) and (1,0); pass explicit centers (k rows x d cols) for
/// anything else.
Dataset make_gaussian_blobs(std::size_t n, std::size_t k, double stddev, std::uint64_t seed,
                            const std::vector<std::vector<double>>& centers = {});

/// Error from a malformed IDX file pair.
struct IdxFormatError : std::runtime_error {
    enum class Kind { BadMagic, Truncated, CountMismatch };
    IdxFormatError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind(kind) {}
    Kind kind;
};

/// Reads an IDX ubyte image file + label file (the common raster format for
/// digit datasets), scales pixels to [0,1], and takes the first
/// min(limit, count) samples. limit must be positive. Class count is
/// max label + 1 and must be >= 2.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit);

/// Shuffled index batches: one Fisher-Yates pass over [0, n), then split
/// into ceil(n / batch_size) consecutive slices (last may be short).
/// Together the batches are exactly a permutation of [0, n).
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng);

struct Batch {
    std::vector<double> x;
    std::vector<int> labels;
};
Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices);

/// CSV with header x0,...,x{d-1},label.
void write_dataset_csv(std::ostream& os, const Dataset& ds);

}  // namespace des
