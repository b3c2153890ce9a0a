#include "flowlab/runner.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowlab/checkpoint.hpp"
#include "flowlab/csv.hpp"
#include "flowlab/datasets.hpp"
#include "flowlab/distill.hpp"
#include "flowlab/errors.hpp"

namespace flowlab {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kRealSalt = 0x7265616c'65766131ULL;   // eval-set draw
constexpr std::uint64_t kNoiseSalt = 0x6e6f6973'65766131ULL;  // eval-noise draw
constexpr std::uint64_t kSwSalt = 0x736c6963'65647732ULL;     // projection draw

std::uint32_t text_crc(const std::string& text) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
    return static_cast<std::uint32_t>(crc);
}

std::uint32_t file_crc(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return text_crc(buf.str());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

// Deterministic run manifest: no timestamps or hostnames, so identical
// invocations produce identical bytes.
void write_manifest(const std::string& dir,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
    std::string text = "tool = flowlab 0.1.0\n";
    for (const auto& [key, value] : entries) text += key + " = " + value + "\n";
    write_text_file(dir + "/manifest.txt", text);
}

void prepare_run_dir(const RunConfig& cfg, const std::string& command,
                     std::vector<std::pair<std::string, std::string>> extra = {}) {
    fs::create_directories(cfg.out);
    const std::string resolved = serialize_config(cfg);
    write_text_file(cfg.out + "/config.txt", resolved);
    std::vector<std::pair<std::string, std::string>> entries;
    entries.emplace_back("command", command);
    entries.emplace_back("config_crc32", std::to_string(text_crc(resolved)));
    for (auto& e : extra) entries.push_back(std::move(e));
    write_manifest(cfg.out, entries);
}

VelocityNetConfig net_config_from(const RunConfig& cfg, std::int64_t data_dim) {
    VelocityNetConfig nc;
    nc.data_dim = data_dim;
    nc.hidden = cfg.hidden;
    nc.depth = cfg.depth;
    nc.time_dim = cfg.time_dim;
    nc.class_dim = cfg.class_dim;
    nc.n_classes = cfg.n_classes;
    return nc;
}

DistillConfig distill_config_from(const RunConfig& cfg) {
    DistillConfig dc;
    dc.schedule.lambda_gan = cfg.lambda_gan;
    dc.schedule.lambda_rf = cfg.lambda_rf;
    dc.schedule.lambda_bi = cfg.lambda_bi;
    dc.schedule.n_gan = cfg.n_gan;
    dc.schedule.n_rf = cfg.n_rf;
    dc.schedule.n_bi = cfg.n_bi;
    dc.schedule.t_trunc = cfg.t_trunc;
    dc.schedule.t_skip = cfg.t_skip;
    dc.schedule.ema_mu = cfg.ema_mu;
    dc.schedule.r1_gamma = cfg.r1_gamma;
    dc.lr_student = cfg.lr_student;
    dc.lr_disc = cfg.lr_disc;
    dc.lr_decay_from = cfg.lr_decay_from;
    dc.iters = cfg.iters;
    dc.batch_size = cfg.batch_size;
    dc.seed = cfg.seed;
    dc.disc_hidden = cfg.disc_hidden;
    dc.disc_depth = cfg.disc_depth;
    return dc;
}

bool params_equal(const std::map<std::string, Tensor>& a,
                  const std::map<std::string, Tensor>& b) {
    if (a.size() != b.size()) return false;
    for (const auto& [name, value] : a) {
        auto it = b.find(name);
        if (it == b.end() || !it->second.same_shape(value)) return false;
        if (it->second.values() != value.values()) return false;
    }
    return true;
}

// "x.csv" -> "x<suffix>.csv"; no extension -> plain append.
std::string with_suffix(const std::string& out, const std::string& suffix) {
    const fs::path p(out);
    fs::path q = p.parent_path() / p.stem();
    return q.string() + suffix + p.extension().string();
}

struct LoadedNet {
    VelocityNet net;
    std::string kind;
};

LoadedNet load_net(const std::string& ckpt, const std::string& which) {
    const std::string kind = checkpoint_kind(ckpt);
    if (kind == "teacher") {
        return {load_teacher_checkpoint(ckpt).net, kind};
    }
    DistillState state = load_distill_checkpoint(ckpt);
    if (which == "student") return {std::move(state.student), kind};
    if (which == "ema") return {std::move(state.ema), kind};
    if (which == "teacher") return {std::move(state.teacher), kind};
    throw UsageError("unknown net '" + which + "' (expected student, ema or teacher)");
}

// Unconditional nets sample directly; conditional nets fall back to their
// null token unless a class is requested.
VelocityField sampling_field(const VelocityNet& net, std::int64_t class_label, double gamma,
                             std::int64_t n) {
    if (class_label >= 0) {
        if (!net.conditional()) throw UsageError("--class requires a conditional net");
        if (class_label >= net.config().n_classes) {
            throw UsageError("class " + std::to_string(class_label) + " out of range (net has " +
                             std::to_string(net.config().n_classes) + " classes)");
        }
        const std::vector<std::int64_t> labels(static_cast<std::size_t>(n), class_label);
        return make_cfg_field(net, labels, gamma);
    }
    if (net.conditional()) {
        const std::vector<std::int64_t> labels(static_cast<std::size_t>(n), kNullClass);
        return make_cfg_field(net, labels, 1.0);
    }
    return make_field(net);
}

std::vector<std::string> point_header(const std::string& id_col, std::int64_t d,
                                      bool with_label) {
    std::vector<std::string> h{id_col};
    for (std::int64_t c = 0; c < d; ++c) h.push_back("z_" + std::to_string(c));
    if (with_label) h.push_back("label");
    return h;
}

}  // namespace

std::string run_train_teacher(const RunConfig& cfg) {
    validate_config(cfg);
    const Dataset data = Dataset::by_name(cfg.dataset);

    TeacherConfig tc;
    tc.iters = cfg.iters;
    tc.batch_size = cfg.batch_size;
    tc.lr = cfg.lr_teacher;
    tc.t_grid_n = cfg.t_grid_n;
    tc.p_uncond = cfg.p_uncond;
    tc.seed = cfg.seed;
    TeacherState state = TeacherState::init(tc, net_config_from(cfg, data.dim()));

    prepare_run_dir(cfg, "train-teacher");
    CsvWriter loss_csv(cfg.out + "/teacher_loss.csv", {"iter", "loss"});
    for (std::int64_t it = 0; it < cfg.iters; ++it) {
        const double loss = teacher_train_step(state, data, tc);
        const bool at_interval = cfg.metric_every > 0 && (it + 1) % cfg.metric_every == 0;
        if (at_interval || it == cfg.iters - 1) {
            loss_csv.row({format_int(it), format_double(loss)});
            loss_csv.flush();
        }
    }
    const std::string path = cfg.out + "/teacher.ckpt";
    save_teacher_checkpoint(state, path);
    return path;
}

std::string run_distill(const RunConfig& cfg, const std::string& resume_path) {
    validate_config(cfg);
    if (cfg.teacher_ckpt.empty()) {
        throw UsageError("distill requires a teacher checkpoint (teacher_ckpt)");
    }
    const TeacherState teacher = load_teacher_checkpoint(cfg.teacher_ckpt);
    const Dataset data = Dataset::by_name(cfg.dataset);
    if (teacher.net.config().data_dim != data.dim()) {
        throw UsageError("teacher dimension does not match dataset " + cfg.dataset);
    }

    const DistillConfig dc = distill_config_from(cfg);
    DistillState state =
        resume_path.empty() ? DistillState::init(teacher.net, dc)
                            : load_distill_checkpoint(resume_path);
    if (!resume_path.empty()) {
        if (!params_equal(state.teacher.params(), teacher.net.params())) {
            throw UsageError("resume checkpoint was distilled from a different teacher");
        }
        if (state.iter > cfg.iters) {
            throw UsageError("resume checkpoint is already past iters = " +
                             std::to_string(cfg.iters));
        }
    }

    prepare_run_dir(cfg, "distill",
                    {{"teacher", cfg.teacher_ckpt},
                     {"teacher_crc32", std::to_string(file_crc(cfg.teacher_ckpt))}});
    const std::string ckpt_path = cfg.out + "/student.ckpt";
    save_distill_checkpoint(state, ckpt_path);  // iteration-0 state is the first good state

    CsvWriter metrics(cfg.out + "/metrics.csv",
                      {"iter", "loss_cd", "loss_gan_gen", "loss_gan_disc", "loss_rf", "loss_bi",
                       "loss_total", "ed_u", "ed_v", "sliced_w2", "precision", "recall"});

    const Tensor real_eval = data.sample(cfg.eval_n, cfg.seed ^ kRealSalt).first;
    auto eval_cells = [&](std::int64_t it, const DistillLosses& losses) {
        Rng noise_rng(cfg.seed ^ kNoiseSalt ^
                      (static_cast<std::uint64_t>(it) * 0x9e3779b97f4a7c15ULL));
        const Tensor z1 = noise_rng.normal_matrix(cfg.eval_n, data.dim());
        const Tensor fake = x0_predict(state.student, z1, 1.0);
        const PrecisionRecall pr = knn_precision_recall(real_eval, fake, 5);
        return std::vector<std::string>{
            format_int(it),
            format_double(losses.cd),
            format_double(losses.gan_gen),
            format_double(losses.gan_disc),
            format_double(losses.rf),
            format_double(losses.bi),
            format_double(losses.total),
            format_double(energy_distance(fake, real_eval, EnergyForm::kU)),
            format_double(energy_distance(fake, real_eval, EnergyForm::kV)),
            format_double(sliced_wasserstein(fake, real_eval, 64,
                                             cfg.seed ^ kSwSalt ^ static_cast<std::uint64_t>(it))),
            format_double(pr.precision),
            format_double(pr.recall)};
    };

    try {
        for (std::int64_t it = state.iter; it < cfg.iters; ++it) {
            const DistillBatch batch =
                DistillBatch::draw(data, dc.batch_size, dc.schedule.t_skip, state.rng);
            const DistillLosses losses = distill_step(state, batch, dc);
            const bool at_interval = cfg.metric_every > 0 && (it + 1) % cfg.metric_every == 0;
            if (at_interval || it == cfg.iters - 1) {
                metrics.row(eval_cells(it, losses));
                metrics.flush();
                save_distill_checkpoint(state, ckpt_path);
            }
        }
    } catch (const DivergenceError&) {
        metrics.flush();  // the last interval checkpoint stays on disk
        throw;
    }
    save_distill_checkpoint(state, ckpt_path);
    return ckpt_path;
}

void run_sample(const SampleArgs& args) {
    if (args.nfe < 1) throw UsageError("--nfe must be >= 1");
    if (args.n < 1) throw UsageError("--n must be >= 1");
    const LoadedNet loaded = load_net(args.ckpt, args.net);
    const VelocityNet& net = loaded.net;
    const std::int64_t d = net.config().data_dim;

    Rng rng(args.seed);
    const Tensor z1 = rng.normal_matrix(args.n, d);
    const VelocityField field = sampling_field(net, args.class_label, args.gamma, args.n);

    Trajectory traj;
    const Tensor z0 = euler_sample(field, z1, args.nfe, args.record_traj ? &traj : nullptr);

    const bool with_label = args.class_label >= 0;
    CsvWriter points(args.out, point_header("sample_id", d, with_label));
    for (std::int64_t i = 0; i < args.n; ++i) {
        std::vector<std::string> cells{format_int(i)};
        for (std::int64_t c = 0; c < d; ++c) cells.push_back(format_double(z0.at(i, c)));
        if (with_label) cells.push_back(format_int(args.class_label));
        points.row(cells);
    }

    if (args.record_traj) {
        std::vector<std::string> header{"sample_id", "step", "t"};
        for (const char* base : {"z_", "v_", "zhat0_"}) {
            for (std::int64_t c = 0; c < d; ++c) header.push_back(base + std::to_string(c));
        }
        CsvWriter tcsv(with_suffix(args.out, "_traj"), header);
        for (std::int64_t i = 0; i < args.n; ++i) {
            for (std::size_t s = 0; s < traj.steps.size(); ++s) {
                const TrajectoryStep& step = traj.steps[s];
                std::vector<std::string> cells{format_int(i), format_int(static_cast<std::int64_t>(s)),
                                               format_double(step.t)};
                for (const Tensor* block : {&step.z, &step.v, &step.zhat0}) {
                    for (std::int64_t c = 0; c < d; ++c) {
                        cells.push_back(format_double(block->at(i, c)));
                    }
                }
                tcsv.row(cells);
            }
        }
    }
}

std::vector<MetricReport> run_eval(const EvalArgs& args) {
    if (args.nfes.empty()) throw UsageError("--nfes must be nonempty");
    for (std::int64_t nfe : args.nfes) {
        if (nfe < 1) throw UsageError("--nfes entries must be >= 1");
    }
    if (args.n < 2) throw UsageError("--n must be >= 2");
    const LoadedNet loaded = load_net(args.ckpt, args.net);
    const VelocityNet& net = loaded.net;
    const Dataset data = Dataset::by_name(args.dataset);
    if (net.config().data_dim != data.dim()) {
        throw UsageError("net dimension does not match dataset " + args.dataset);
    }
    const std::string run_id =
        args.run_id.empty() ? fs::path(args.ckpt).stem().string() : args.run_id;

    const Tensor real = data.sample(args.n, args.seed ^ kRealSalt).first;
    Rng noise_rng(args.seed ^ kNoiseSalt);
    const Tensor z1 = noise_rng.normal_matrix(args.n, data.dim());
    const VelocityField field = sampling_field(net, -1, 1.0, args.n);
    const Tensor consistency = nfe_consistency(field, z1, args.nfes);

    std::vector<MetricReport> reports;
    for (std::int64_t nfe : args.nfes) {
        const Tensor samples = euler_sample(field, z1, nfe);
        MetricReport r;
        r.run_id = run_id;
        r.nfe = nfe;
        r.energy = energy_distance(samples, real, EnergyForm::kU);
        r.energy_v = energy_distance(samples, real, EnergyForm::kV);
        r.sliced_w2 = sliced_wasserstein(samples, real, 64, args.seed ^ kSwSalt);
        const PrecisionRecall pr = knn_precision_recall(real, samples, 5);
        r.precision = pr.precision;
        r.recall = pr.recall;
        r.consistency = consistency;
        r.consistency_nfes = args.nfes;
        r.straightness = straightness(field, z1, std::max<std::int64_t>(2, nfe));
        r.saturation = saturation_stats(samples, real);
        reports.push_back(std::move(r));
    }

    // Wide layout: one column per NFE, mirroring an ablation-table axis.
    std::vector<std::string> header{"run_id", "metric"};
    for (std::int64_t nfe : args.nfes) header.push_back("nfe_" + std::to_string(nfe));
    CsvWriter csv(args.out, header);
    auto write_metric = [&](const std::string& name, auto getter) {
        std::vector<std::string> cells{run_id, name};
        for (const MetricReport& r : reports) cells.push_back(format_double(getter(r)));
        csv.row(cells);
    };
    write_metric("energy_u", [](const MetricReport& r) { return r.energy; });
    write_metric("energy_v", [](const MetricReport& r) { return r.energy_v; });
    write_metric("sliced_w2", [](const MetricReport& r) { return r.sliced_w2; });
    write_metric("precision", [](const MetricReport& r) { return r.precision; });
    write_metric("recall", [](const MetricReport& r) { return r.recall; });
    write_metric("straightness", [](const MetricReport& r) { return r.straightness; });
    for (std::int64_t c = 0; c < data.dim(); ++c) {
        write_metric("sat_mean_shift_" + std::to_string(c),
                     [c](const MetricReport& r) { return r.saturation.mean_shift[c]; });
    }
    for (std::int64_t c = 0; c < data.dim(); ++c) {
        write_metric("sat_std_ratio_" + std::to_string(c),
                     [c](const MetricReport& r) { return r.saturation.std_ratio[c]; });
    }

    std::vector<std::string> cheader{"nfe"};
    for (std::int64_t nfe : args.nfes) cheader.push_back("nfe_" + std::to_string(nfe));
    CsvWriter ccsv(with_suffix(args.out, "_consistency"), cheader);
    for (std::size_t i = 0; i < args.nfes.size(); ++i) {
        std::vector<std::string> cells{format_int(args.nfes[i])};
        for (std::size_t j = 0; j < args.nfes.size(); ++j) {
            cells.push_back(format_double(
                consistency.at(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j))));
        }
        ccsv.row(cells);
    }
    return reports;
}

void run_ablate(const RunConfig& cfg, const std::vector<std::string>& stack) {
    static const std::vector<std::string> known = {"cd", "gan", "rf", "bi"};
    if (stack.empty()) throw UsageError("--stack must be nonempty");
    for (const auto& stage : stack) {
        if (std::find(known.begin(), known.end(), stage) == known.end()) {
            throw UsageError("unknown ablation stage '" + stage +
                             "' (expected cd, gan, rf or bi)");
        }
    }
    validate_config(cfg);
    fs::create_directories(cfg.out);
    std::string listing;
    for (const auto& stage : stack) listing += (listing.empty() ? "" : ",") + stage;
    write_manifest(cfg.out, {{"command", "ablate"}, {"stack", listing}});

    for (const auto& stage : stack) {
        RunConfig sub = cfg;
        sub.out = cfg.out + "/" + stage;
        // Cumulative gates: cd -> +gan -> +rf -> +bi.
        if (stage == "cd") sub.lambda_gan = 0.0;
        if (stage == "cd" || stage == "gan") sub.lambda_rf = 0.0;
        if (stage != "bi") sub.lambda_bi = 0.0;
        run_distill(sub);
    }
}

void run_data_dump(const std::string& name, std::int64_t n, std::uint64_t seed,
                   const std::string& out_file) {
    const Dataset data = Dataset::by_name(name);
    const auto [points, labels] = data.sample(n, seed);
    const bool with_label = data.n_classes() > 0;
    CsvWriter csv(out_file, point_header("sample_id", data.dim(), with_label));
    for (std::int64_t i = 0; i < n; ++i) {
        std::vector<std::string> cells{format_int(i)};
        for (std::int64_t c = 0; c < data.dim(); ++c) {
            cells.push_back(format_double(points.at(i, c)));
        }
        if (with_label) cells.push_back(format_int(labels[static_cast<std::size_t>(i)]));
        csv.row(cells);
    }
}

}  // namespace flowlab
