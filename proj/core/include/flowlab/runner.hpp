#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowlab/config.hpp"
#include "flowlab/metrics.hpp"

namespace flowlab {

// Orchestration behind the CLI subcommands.  Every run owns its output
// directory: resolved config, manifest and all CSVs land inside it, nothing
// outside.  Errors surface as UsageError / DivergenceError / IoError for the
// CLI to map onto exit codes 1 / 2 / 3.

// Trains the flow-matching teacher; returns the checkpoint path
// (<out>/teacher.ckpt) next to teacher_loss.csv.
std::string run_train_teacher(const RunConfig& cfg);

// Runs distillation from cfg.teacher_ckpt; returns the checkpoint path
// (<out>/student.ckpt, holding teacher, student, EMA and discriminator).
// resume_path continues a previous run bit-exactly.  On divergence the last
// interval checkpoint stays on disk and DivergenceError propagates.
std::string run_distill(const RunConfig& cfg, const std::string& resume_path = "");

struct SampleArgs {
    std::string ckpt;
    std::int64_t nfe = 1;
    std::int64_t n = 1000;
    std::uint64_t seed = 0;
    double gamma = 1.5;            // used only with class_label
    std::int64_t class_label = -1; // -1 = unconditional sampling
    std::string net = "student";   // student | ema | teacher (distill checkpoints)
    std::string out = "samples.csv";
    bool record_traj = false;      // also writes <out stem>_traj.csv
};
void run_sample(const SampleArgs& args);

struct EvalArgs {
    std::string ckpt;
    std::string dataset = "gauss8";
    std::vector<std::int64_t> nfes = {1, 2, 4, 8, 16};
    std::int64_t n = 2000;
    std::uint64_t seed = 0;
    std::string net = "student";
    std::string run_id;  // defaults to the checkpoint filename
    std::string out = "metrics.csv";  // consistency matrix lands next to it
};
std::vector<MetricReport> run_eval(const EvalArgs& args);

// The incremental loss-stack ablation: cd -> +gan -> +rf -> +bi, one
// sub-directory per stage, configs differing only in the loss gates.
void run_ablate(const RunConfig& cfg, const std::vector<std::string>& stack);

void run_data_dump(const std::string& name, std::int64_t n, std::uint64_t seed,
                   const std::string& out_file);

}  // namespace flowlab
