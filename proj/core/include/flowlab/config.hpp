#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flowlab {

// Every knob a run can carry, with desk-scale defaults.  Loss weights,
// warm-ups, thresholds and the EMA rate default to the reference training
// recipe; learning-rate decay toward zero (from `lr_decay_from` on) keeps the
// adversarial term from wandering at the end of training.
struct RunConfig {
    // data and architecture
    std::string dataset = "gauss8";
    std::int64_t hidden = 128;
    std::int64_t depth = 4;
    std::int64_t time_dim = 32;
    std::int64_t class_dim = 16;
    std::int64_t n_classes = 0;  // > 0 trains a conditional teacher
    std::int64_t disc_hidden = 128;
    std::int64_t disc_depth = 3;

    // teacher training
    double lr_teacher = 1e-3;
    std::int64_t t_grid_n = 50;
    double p_uncond = 0.1;  // label-dropout rate for conditional teachers

    // distillation losses
    double lambda_gan = 0.1;
    double lambda_rf = 0.1;
    double lambda_bi = 0.1;
    std::int64_t n_gan = 0;
    std::int64_t n_rf = 1000;
    std::int64_t n_bi = 1000;
    double t_trunc = 0.4;
    double t_skip = 0.1;
    double ema_mu = 0.9;
    double r1_gamma = 0.0;

    // optimization
    double lr_student = 1e-4;
    double lr_disc = 1e-4;
    std::int64_t lr_decay_from = 2000;  // -1 disables the linear decay
    std::int64_t iters = 8000;
    std::int64_t batch_size = 128;
    std::uint64_t seed = 0;

    // run plumbing
    std::string teacher_ckpt;
    std::int64_t metric_every = 500;  // 0 logs losses only at the end
    std::int64_t eval_n = 2000;
    double gamma = 1.5;  // CFG scale used when sampling conditionally
    std::string out = "out";
};

// `key = value` lines, `#` comments, blank lines ignored.  Unknown keys and
// out-of-range values raise UsageError naming the key.  Missing keys keep
// their defaults; an empty file is the default config.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// One `key value` override (used by command-line flags); validates like the
// file parser.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical `key = value` listing of every key, round-trippable through
// parse_config_text bit-exactly.
std::string serialize_config(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);

// All recognized keys, in canonical order (drives CLI flag registration).
const std::vector<std::string>& config_keys();

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace flowlab
