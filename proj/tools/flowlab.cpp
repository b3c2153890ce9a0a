#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "flowlab/config.hpp"
#include "flowlab/errors.hpp"
#include "flowlab/runner.hpp"

namespace {

// Config-backed subcommands accept --config FILE plus one flag per config
// key; flags override the file.
struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value config file");
        for (const std::string& key : flowlab::config_keys()) {
            std::string names = "--" + key;
            if (key == "teacher_ckpt") names += ",--teacher";
            options[key] = cmd->add_option(names, values[key], "config override");
        }
    }

    flowlab::RunConfig resolve() const {
        flowlab::RunConfig cfg;
        if (!config_path.empty()) cfg = flowlab::parse_config_file(config_path);
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) flowlab::apply_override(cfg, key, values.at(key));
        }
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flow-matching teacher training, one-step distillation and evaluation"};
    app.require_subcommand(1);

    ConfigFlags teacher_flags;
    CLI::App* train = app.add_subcommand("train-teacher", "train a flow-matching teacher");
    teacher_flags.attach(train);
    train->callback([&] { std::cout << flowlab::run_train_teacher(teacher_flags.resolve()) << "\n"; });

    ConfigFlags distill_flags;
    std::string resume_path;
    CLI::App* distill = app.add_subcommand("distill", "distill a teacher into a few-step student");
    distill_flags.attach(distill);
    distill->add_option("--resume", resume_path, "continue from a distill checkpoint");
    distill->callback(
        [&] { std::cout << flowlab::run_distill(distill_flags.resolve(), resume_path) << "\n"; });

    flowlab::SampleArgs sargs;
    CLI::App* sample = app.add_subcommand("sample", "draw points from a checkpointed net");
    sample->add_option("--ckpt", sargs.ckpt, "teacher or distill checkpoint")->required();
    sample->add_option("--nfe", sargs.nfe, "Euler steps");
    sample->add_option("--n", sargs.n, "number of samples");
    sample->add_option("--seed", sargs.seed, "noise seed");
    sample->add_option("--gamma", sargs.gamma, "guidance scale (with --class)");
    sample->add_option("--class", sargs.class_label, "class label for conditional nets");
    sample->add_option("--net", sargs.net, "student, ema or teacher (distill checkpoints)");
    sample->add_option("--out", sargs.out, "output CSV");
    sample->add_flag("--record-traj", sargs.record_traj, "also write the step-by-step trajectory");
    sample->callback([&] { flowlab::run_sample(sargs); });

    flowlab::EvalArgs eargs;
    CLI::App* eval = app.add_subcommand("eval", "metric sweep over NFE budgets");
    eval->add_option("--ckpt", eargs.ckpt, "teacher or distill checkpoint")->required();
    eval->add_option("--dataset", eargs.dataset, "reference dataset");
    eval->add_option("--nfes", eargs.nfes, "comma-separated NFE budgets")->delimiter(',');
    eval->add_option("--n", eargs.n, "samples per side");
    eval->add_option("--seed", eargs.seed, "evaluation seed");
    eval->add_option("--net", eargs.net, "student, ema or teacher (distill checkpoints)");
    eval->add_option("--run-id", eargs.run_id, "row label (defaults to checkpoint name)");
    eval->add_option("--out", eargs.out, "output CSV");
    eval->callback([&] { flowlab::run_eval(eargs); });

    ConfigFlags ablate_flags;
    std::vector<std::string> stack;
    CLI::App* ablate = app.add_subcommand("ablate", "incremental loss-stack runs");
    ablate_flags.attach(ablate);
    ablate->add_option("--stack", stack, "comma-separated stages from cd,gan,rf,bi")
        ->delimiter(',')
        ->required();
    ablate->callback([&] { flowlab::run_ablate(ablate_flags.resolve(), stack); });

    CLI::App* data = app.add_subcommand("data", "dataset utilities");
    data->require_subcommand(1);
    std::string dump_name = "gauss8";
    std::int64_t dump_n = 1000;
    std::uint64_t dump_seed = 0;
    std::string dump_out = "data.csv";
    CLI::App* dump = data->add_subcommand("dump", "write dataset samples to CSV");
    dump->add_option("--name", dump_name, "dataset name");
    dump->add_option("--n", dump_n, "number of samples");
    dump->add_option("--seed", dump_seed, "sampling seed");
    dump->add_option("--out", dump_out, "output CSV");
    dump->callback([&] { flowlab::run_data_dump(dump_name, dump_n, dump_seed, dump_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const flowlab::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const flowlab::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const flowlab::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
