#include "des/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "des/fmt.hpp"

namespace des {

const char* dataset_name(DatasetKind k) {
    switch (k) {
        case DatasetKind::TwoMoons: return "two_moons";
        case DatasetKind::Blobs: return "blobs";
        case DatasetKind::Idx: return "idx";
    }
    return "?";
}

const char* mode_name(TrainMode m) {
    return m == TrainMode::Scheduled ? "scheduled" : "fixed";
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
    throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, std::size_t line) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) fail(line, "expected a number, got \"" + v + "\"");
    return out;
}

std::uint64_t parse_u64(const std::string& v, std::size_t line) {
    std::uint64_t out = 0;
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end)
        fail(line, "expected a non-negative integer, got \"" + v + "\"");
    return out;
}

std::size_t parse_size(const std::string& v, std::size_t line) {
    return static_cast<std::size_t>(parse_u64(v, line));
}

bool parse_bool(const std::string& v, std::size_t line) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(line, "expected true or false, got \"" + v + "\"");
}

std::vector<std::size_t> parse_size_list(const std::string& v, std::size_t line) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const std::size_t comma = v.find(',', start);
        const std::string item =
            trim(comma == std::string::npos ? v.substr(start) : v.substr(start, comma - start));
        if (item.empty()) fail(line, "empty entry in list \"" + v + "\"");
        out.push_back(parse_size(item, line));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

DatasetKind parse_dataset(const std::string& v, std::size_t line) {
    if (v == "two_moons") return DatasetKind::TwoMoons;
    if (v == "blobs") return DatasetKind::Blobs;
    if (v == "idx") return DatasetKind::Idx;
    fail(line, "data.dataset must be two_moons, blobs, or idx; got \"" + v + "\"");
}

TrainMode parse_mode(const std::string& v, std::size_t line) {
    if (v == "scheduled") return TrainMode::Scheduled;
    if (v == "fixed") return TrainMode::FixedEps;
    fail(line, "train.mode must be scheduled or fixed; got \"" + v + "\"");
}

struct RawLine {
    std::string key, value;
    std::size_t line;
};

std::vector<RawLine> scan(std::istream& is) {
    std::vector<RawLine> out;
    std::map<std::string, std::size_t> seen;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(is, text)) {
        ++line_no;
        const std::size_t hash = text.find('#');
        if (hash != std::string::npos) text.erase(hash);
        const std::string stripped = trim(text);
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) fail(line_no, "expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) fail(line_no, "missing key before '='");
        if (value.empty()) fail(line_no, "missing value for key \"" + key + "\"");
        auto [it, inserted] = seen.emplace(key, line_no);
        if (!inserted)
            fail(line_no, "duplicate key \"" + key + "\" (first set on line " +
                              std::to_string(it->second) + ")");
        out.push_back({key, value, line_no});
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, std::size_t)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"data.dataset", [](RunConfig& c, const std::string& v, std::size_t l) { c.dataset = parse_dataset(v, l); }},
        {"data.n", [](RunConfig& c, const std::string& v, std::size_t l) { c.n = parse_size(v, l); }},
        {"data.test_n", [](RunConfig& c, const std::string& v, std::size_t l) { c.test_n = parse_size(v, l); }},
        {"data.noise", [](RunConfig& c, const std::string& v, std::size_t l) { c.noise = parse_double(v, l); }},
        {"data.stddev", [](RunConfig& c, const std::string& v, std::size_t l) { c.stddev = parse_double(v, l); }},
        {"data.images", [](RunConfig& c, const std::string& v, std::size_t) { c.images = v; }},
        {"data.labels", [](RunConfig& c, const std::string& v, std::size_t) { c.labels = v; }},
        {"data.test_images", [](RunConfig& c, const std::string& v, std::size_t) { c.test_images = v; }},
        {"data.test_labels", [](RunConfig& c, const std::string& v, std::size_t) { c.test_labels = v; }},
        {"data.limit", [](RunConfig& c, const std::string& v, std::size_t l) { c.limit = parse_size(v, l); }},
        {"data.test_limit", [](RunConfig& c, const std::string& v, std::size_t l) { c.test_limit = parse_size(v, l); }},
        {"model.hidden", [](RunConfig& c, const std::string& v, std::size_t l) { c.hidden = parse_size_list(v, l); }},
        {"model.dropout", [](RunConfig& c, const std::string& v, std::size_t l) { c.dropout = parse_double(v, l); }},
        {"schedule.eps_min", [](RunConfig& c, const std::string& v, std::size_t l) { c.schedule.eps_min = parse_double(v, l); }},
        {"schedule.lambda", [](RunConfig& c, const std::string& v, std::size_t l) { c.schedule.lambda = parse_double(v, l); }},
        {"schedule.alpha", [](RunConfig& c, const std::string& v, std::size_t l) { c.schedule.alpha = parse_double(v, l); }},
        {"schedule.beta", [](RunConfig& c, const std::string& v, std::size_t l) { c.schedule.beta = parse_double(v, l); }},
        {"schedule.gamma", [](RunConfig& c, const std::string& v, std::size_t l) { c.schedule.gamma = parse_double(v, l); }},
        {"schedule.mc_passes", [](RunConfig& c, const std::string& v, std::size_t l) { c.schedule.mc_passes = parse_size(v, l); }},
        {"attack.steps", [](RunConfig& c, const std::string& v, std::size_t l) { c.attack_steps = parse_size(v, l); }},
        {"attack.step_size", [](RunConfig& c, const std::string& v, std::size_t l) { c.attack_step_size = parse_double(v, l); }},
        {"attack.step_relative", [](RunConfig& c, const std::string& v, std::size_t l) { c.attack_step_relative = parse_bool(v, l); }},
        {"attack.random_start", [](RunConfig& c, const std::string& v, std::size_t l) { c.attack_random_start = parse_bool(v, l); }},
        {"eval.eps", [](RunConfig& c, const std::string& v, std::size_t l) { c.eval_eps = parse_double(v, l); }},
        {"eval.steps", [](RunConfig& c, const std::string& v, std::size_t l) { c.eval_steps = parse_size(v, l); }},
        {"optim.lr", [](RunConfig& c, const std::string& v, std::size_t l) { c.optim.lr = parse_double(v, l); }},
        {"optim.momentum", [](RunConfig& c, const std::string& v, std::size_t l) { c.optim.momentum = parse_double(v, l); }},
        {"optim.weight_decay", [](RunConfig& c, const std::string& v, std::size_t l) { c.optim.weight_decay = parse_double(v, l); }},
        {"optim.epochs", [](RunConfig& c, const std::string& v, std::size_t l) { c.optim.epochs = parse_size(v, l); }},
        {"optim.batch_size", [](RunConfig& c, const std::string& v, std::size_t l) { c.optim.batch_size = parse_size(v, l); }},
        {"optim.lr_decay", [](RunConfig& c, const std::string& v, std::size_t l) { c.optim.lr_decay = parse_double(v, l); }},
        {"train.mode", [](RunConfig& c, const std::string& v, std::size_t l) { c.mode = parse_mode(v, l); }},
        {"train.fixed_eps", [](RunConfig& c, const std::string& v, std::size_t l) { c.fixed_eps = parse_double(v, l); }},
        {"train.seed", [](RunConfig& c, const std::string& v, std::size_t l) { c.seed = parse_u64(v, l); }},
    };
    return table;
}

RunConfig defaults_for(DatasetKind kind) {
    RunConfig c;
    c.dataset = kind;
    if (kind == DatasetKind::Idx) {
        c.hidden = {256, 128};
        c.schedule.eps_min = 4.0 / 255.0;
        c.schedule.lambda = 8.0 / 255.0;
        c.eval_eps = 8.0 / 255.0;
        c.fixed_eps = 8.0 / 255.0;
    }
    return c;
}

}  // namespace

void RunConfig::validate() const {
    schedule.validate();
    optim.validate();
    if (hidden.empty()) throw ConfigError("config: model.hidden must not be empty");
    for (std::size_t h : hidden)
        if (h == 0) throw ConfigError("config: hidden widths must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ConfigError("config: model.dropout must be in [0, 1)");
    if (attack_steps < 1) throw ConfigError("config: attack.steps must be >= 1");
    if (!(attack_step_size > 0.0)) throw ConfigError("config: attack.step_size must be > 0");
    if (eval_steps < 1) throw ConfigError("config: eval.steps must be >= 1");
    if (!(eval_eps >= 0.0)) throw ConfigError("config: eval.eps must be >= 0");
    if (!(fixed_eps >= 0.0)) throw ConfigError("config: train.fixed_eps must be >= 0");
    switch (dataset) {
        case DatasetKind::TwoMoons:
            if (n < 4 || n % 2 != 0)
                throw ConfigError("config: data.n must be even and >= 4 for two_moons");
            if (test_n < 4 || test_n % 2 != 0)
                throw ConfigError("config: data.test_n must be even and >= 4 for two_moons");
            if (!(noise >= 0.0)) throw ConfigError("config: data.noise must be >= 0");
            break;
        case DatasetKind::Blobs:
            if (n == 0 || n % 2 != 0)
                throw ConfigError("config: data.n must be a positive multiple of 2 for blobs");
            if (test_n == 0 || test_n % 2 != 0)
                throw ConfigError("config: data.test_n must be a positive multiple of 2 for blobs");
            if (!(stddev > 0.0)) throw ConfigError("config: data.stddev must be > 0");
            break;
        case DatasetKind::Idx:
            if (images.empty() || labels.empty() || test_images.empty() || test_labels.empty())
                throw ConfigError(
                    "config: idx needs data.images, data.labels, data.test_images, "
                    "data.test_labels");
            if (limit == 0 || test_limit == 0)
                throw ConfigError("config: data.limit and data.test_limit must be positive");
            break;
    }
}

RunConfig parse_config(std::istream& is) {
    const std::vector<RawLine> lines = scan(is);
    DatasetKind kind = DatasetKind::TwoMoons;
    for (const RawLine& l : lines)
        if (l.key == "data.dataset") kind = parse_dataset(l.value, l.line);
    RunConfig cfg = defaults_for(kind);
    const auto& table = setters();
    for (const RawLine& l : lines) {
        const auto it = table.find(l.key);
        if (it == table.end()) fail(l.line, "unknown key \"" + l.key + "\"");
        it->second(cfg, l.value, l.line);
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    return parse_config(is);
}

void write_config(std::ostream& os, const RunConfig& c) {
    os << "# resolved configuration\n";
    os << "data.dataset = " << dataset_name(c.dataset) << '\n';
    os << "data.n = " << c.n << '\n';
    os << "data.test_n = " << c.test_n << '\n';
    os << "data.noise = " << fmt(c.noise) << '\n';
    os << "data.stddev = " << fmt(c.stddev) << '\n';
    if (!c.images.empty()) os << "data.images = " << c.images << '\n';
    if (!c.labels.empty()) os << "data.labels = " << c.labels << '\n';
    if (!c.test_images.empty()) os << "data.test_images = " << c.test_images << '\n';
    if (!c.test_labels.empty()) os << "data.test_labels = " << c.test_labels << '\n';
    os << "data.limit = " << c.limit << '\n';
    os << "data.test_limit = " << c.test_limit << '\n';
    os << "model.hidden = ";
    for (std::size_t i = 0; i < c.hidden.size(); ++i)
        os << (i ? "," : "") << c.hidden[i];
    os << '\n';
    os << "model.dropout = " << fmt(c.dropout) << '\n';
    os << "schedule.eps_min = " << fmt(c.schedule.eps_min) << '\n';
    os << "schedule.lambda = " << fmt(c.schedule.lambda) << '\n';
    os << "schedule.alpha = " << fmt(c.schedule.alpha) << '\n';
    os << "schedule.beta = " << fmt(c.schedule.beta) << '\n';
    os << "schedule.gamma = " << fmt(c.schedule.gamma) << '\n';
    os << "schedule.mc_passes = " << c.schedule.mc_passes << '\n';
    os << "attack.steps = " << c.attack_steps << '\n';
    os << "attack.step_size = " << fmt(c.attack_step_size) << '\n';
    os << "attack.step_relative = " << (c.attack_step_relative ? "true" : "false") << '\n';
    os << "attack.random_start = " << (c.attack_random_start ? "true" : "false") << '\n';
    os << "eval.eps = " << fmt(c.eval_eps) << '\n';
    os << "eval.steps = " << c.eval_steps << '\n';
    os << "optim.lr = " << fmt(c.optim.lr) << '\n';
    os << "optim.momentum = " << fmt(c.optim.momentum) << '\n';
    os << "optim.weight_decay = " << fmt(c.optim.weight_decay) << '\n';
    os << "optim.epochs = " << c.optim.epochs << '\n';
    os << "optim.batch_size = " << c.optim.batch_size << '\n';
    os << "optim.lr_decay = " << fmt(c.optim.lr_decay) << '\n';
    os << "train.mode = " << mode_name(c.mode) << '\n';
    os << "train.fixed_eps = " << fmt(c.fixed_eps) << '\n';
    os << "train.seed = " << c.seed << '\n';
    if (c.mode == TrainMode::Scheduled && c.schedule.lambda == 0.0)
        os << "# lambda = 0: every budget equals eps_min, matching train.mode = fixed with "
              "train.fixed_eps = "
           << fmt(c.schedule.eps_min) << '\n';
}

}  // namespace des
