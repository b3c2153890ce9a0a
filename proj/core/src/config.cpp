#include "flowlab/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "flowlab/csv.hpp"
#include "flowlab/datasets.hpp"
#include "flowlab/errors.hpp"

namespace flowlab {

namespace {

struct KeyDef {
    std::string name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw UsageError(key + ": not a number: '" + value + "'");
    }
    return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::int64_t out = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw UsageError(key + ": not an integer: '" + value + "'");
    }
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw UsageError(key + ": not an unsigned integer: '" + value + "'");
    }
    return out;
}

#define DOUBLE_KEY(field)                                                          \
    KeyDef {                                                                       \
        #field, [](const RunConfig& c) { return format_double(c.field); },         \
            [](RunConfig& c, const std::string& v) { c.field = parse_double(#field, v); } \
    }
#define INT_KEY(field)                                                             \
    KeyDef {                                                                       \
        #field, [](const RunConfig& c) { return format_int(c.field); },            \
            [](RunConfig& c, const std::string& v) { c.field = parse_int(#field, v); } \
    }
#define STRING_KEY(field)                                                          \
    KeyDef {                                                                       \
        #field, [](const RunConfig& c) { return c.field; },                        \
            [](RunConfig& c, const std::string& v) { c.field = v; }                \
    }

const std::vector<KeyDef>& key_defs() {
    static const std::vector<KeyDef> defs = {
        STRING_KEY(dataset),
        INT_KEY(hidden),
        INT_KEY(depth),
        INT_KEY(time_dim),
        INT_KEY(class_dim),
        INT_KEY(n_classes),
        INT_KEY(disc_hidden),
        INT_KEY(disc_depth),
        DOUBLE_KEY(lr_teacher),
        INT_KEY(t_grid_n),
        DOUBLE_KEY(p_uncond),
        DOUBLE_KEY(lambda_gan),
        DOUBLE_KEY(lambda_rf),
        DOUBLE_KEY(lambda_bi),
        INT_KEY(n_gan),
        INT_KEY(n_rf),
        INT_KEY(n_bi),
        DOUBLE_KEY(t_trunc),
        DOUBLE_KEY(t_skip),
        DOUBLE_KEY(ema_mu),
        DOUBLE_KEY(r1_gamma),
        DOUBLE_KEY(lr_student),
        DOUBLE_KEY(lr_disc),
        INT_KEY(lr_decay_from),
        INT_KEY(iters),
        INT_KEY(batch_size),
        KeyDef{"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
               [](RunConfig& c, const std::string& v) { c.seed = parse_uint("seed", v); }},
        STRING_KEY(teacher_ckpt),
        INT_KEY(metric_every),
        INT_KEY(eval_n),
        DOUBLE_KEY(gamma),
        STRING_KEY(out),
    };
    return defs;
}

#undef DOUBLE_KEY
#undef INT_KEY
#undef STRING_KEY

const KeyDef* find_key(const std::string& name) {
    for (const auto& def : key_defs()) {
        if (def.name == name) return &def;
    }
    return nullptr;
}

void check(bool ok, const std::string& message) {
    if (!ok) throw UsageError(message);
}

void check_unit_interval(const char* key, double v) {
    check(v >= 0.0 && v <= 1.0, std::string(key) + " out of [0,1]");
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& def : key_defs()) out.push_back(def.name);
        return out;
    }();
    return names;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const KeyDef* def = find_key(key);
    if (!def) throw UsageError("unknown config key: " + key);
    def->set(cfg, trim(value));
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(line_no) +
                             ": expected 'key = value', got '" + line + "'");
        }
        apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    validate_config(cfg);
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& def : key_defs()) {
        out += def.name;
        out += " = ";
        out += def.get(cfg);
        out += "\n";
    }
    return out;
}

void validate_config(const RunConfig& cfg) {
    try {
        Dataset::by_name(cfg.dataset);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());  // lists the valid names
    }
    check(cfg.hidden >= 1, "hidden must be >= 1");
    check(cfg.depth >= 1, "depth must be >= 1");
    check(cfg.time_dim >= 2 && cfg.time_dim % 2 == 0, "time_dim must be even and >= 2");
    check(cfg.class_dim >= 1, "class_dim must be >= 1");
    check(cfg.n_classes >= 0, "n_classes must be >= 0");
    if (cfg.n_classes > 0) {
        const auto ds = Dataset::by_name(cfg.dataset);
        check(cfg.n_classes == ds.n_classes(),
              "n_classes must match dataset " + cfg.dataset + " (" +
                  std::to_string(ds.n_classes()) + " classes)");
    }
    check(cfg.disc_hidden >= 1, "disc_hidden must be >= 1");
    check(cfg.disc_depth >= 1, "disc_depth must be >= 1");
    check(cfg.lr_teacher > 0, "lr_teacher must be > 0");
    check(cfg.t_grid_n >= 2, "t_grid_n must be >= 2");
    check_unit_interval("p_uncond", cfg.p_uncond);
    check(cfg.lambda_gan >= 0, "lambda_gan must be >= 0");
    check(cfg.lambda_rf >= 0, "lambda_rf must be >= 0");
    check(cfg.lambda_bi >= 0, "lambda_bi must be >= 0");
    check(cfg.n_gan >= 0, "n_gan must be >= 0");
    check(cfg.n_rf >= 0, "n_rf must be >= 0");
    check(cfg.n_bi >= 0, "n_bi must be >= 0");
    check_unit_interval("t_trunc", cfg.t_trunc);
    check_unit_interval("t_skip", cfg.t_skip);
    check_unit_interval("ema_mu", cfg.ema_mu);
    check(cfg.r1_gamma >= 0, "r1_gamma must be >= 0");
    check(cfg.lr_student > 0, "lr_student must be > 0");
    check(cfg.lr_disc > 0, "lr_disc must be > 0");
    check(cfg.lr_decay_from >= -1, "lr_decay_from must be >= -1 (-1 disables)");
    check(cfg.iters >= 0, "iters must be >= 0");
    check(cfg.batch_size >= 1, "batch_size must be >= 1");
    check(cfg.metric_every >= 0, "metric_every must be >= 0");
    check(cfg.eval_n >= 2, "eval_n must be >= 2");
    check(std::isfinite(cfg.gamma), "gamma must be finite");
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

}  // namespace flowlab
