#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "des/scheduler.hpp"
#include "des/train.hpp"

// Run configuration. The file format is one dotted key per line:
//
//   # comment
//   data.dataset = two_moons
//   schedule.lambda = 0.2
//
// Parsing is strict: unknown keys, duplicate keys, malformed lines, and
// out-of-range values are all errors that carry the line number. Defaults
// for a few keys depend on data.dataset (hidden widths and the budget /
// evaluation radii are sized for unit-box images under idx and for the
// synthetic 2-d sets otherwise). write_config emits every resolved value in
// a canonical order with round-trip-exact numbers, so feeding the echo back
// through parse_config reproduces the configuration bit for bit.

namespace des {

enum class DatasetKind { TwoMoons, Blobs, Idx };

struct RunConfig {
    // data
    DatasetKind dataset = DatasetKind::TwoMoons;
    std::size_t n = 1000;       // training samples (synthetic)
    std::size_t test_n = 200;   // test samples (synthetic)
    double noise = 0.1;         // two_moons jitter
    double stddev = 0.25;       // blobs spread
    std::string images, labels; // idx training pair
    std::string test_images, test_labels;
    std::size_t limit = 10000, test_limit = 2000;  // idx sample caps

    // model
    std::vector<std::size_t> hidden = {64, 64};
    double dropout = 0.1;

    // schedule + training attack + optimizer
    ScheduleConfig schedule;
    std::size_t attack_steps = 10;
    double attack_step_size = 0.25;
    bool attack_step_relative = true;
    bool attack_random_start = true;
    OptimConfig optim;

    // evaluation attack
    double eval_eps = 0.1;
    std::size_t eval_steps = 20;

    // run
    TrainMode mode = TrainMode::Scheduled;
    double fixed_eps = 0.1;
    std::uint64_t seed = 0;

    /// Cross-field checks (idx paths present, synthetic sizes valid, ...).
    void validate() const;
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Parse, apply dataset-dependent defaults, validate.
RunConfig parse_config(std::istream& is);
RunConfig parse_config_file(const std::string& path);

/// Canonical echo of every resolved key. Appends an explanatory comment when
/// lambda = 0 makes the scheduled budgets collapse to the constant eps_min.
void write_config(std::ostream& os, const RunConfig& cfg);

const char* dataset_name(DatasetKind k);
const char* mode_name(TrainMode m);

}  // namespace des
