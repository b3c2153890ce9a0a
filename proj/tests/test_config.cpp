#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "flowlab/config.hpp"
#include "flowlab/errors.hpp"

using flowlab::RunConfig;
using flowlab::UsageError;

namespace {

std::string write_tmp(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("an empty config file yields the full default recipe") {
    const std::string path = write_tmp("flowlab_empty.cfg", "");
    const RunConfig cfg = flowlab::parse_config_file(path);
    CHECK(cfg.ema_mu == 0.9);
    CHECK(cfg.t_trunc == 0.4);
    CHECK(cfg.t_skip == 0.1);
    CHECK(cfg.lambda_gan == 0.1);
    CHECK(cfg.lambda_rf == 0.1);
    CHECK(cfg.lambda_bi == 0.1);
    CHECK(cfg.n_gan == 0);
    CHECK(cfg.n_rf == 1000);
    CHECK(cfg.n_bi == 1000);
    CHECK(cfg.dataset == "gauss8");
    CHECK(cfg == RunConfig{});
    std::filesystem::remove(path);
}

TEST_CASE("key-value grammar supports comments, blanks, and reports line numbers") {
    const std::string path = write_tmp("flowlab_basic.cfg",
                                       "# comment line\n"
                                       "iters = 123\n"
                                       "\n"
                                       "dataset = moons   # trailing comment\n"
                                       "lambda_gan = 0.25\n");
    const RunConfig cfg = flowlab::parse_config_file(path);
    CHECK(cfg.iters == 123);
    CHECK(cfg.dataset == "moons");
    CHECK(cfg.lambda_gan == 0.25);
    std::filesystem::remove(path);

    const std::string bad = write_tmp("flowlab_bad.cfg", "iters = 10\nthis is not a pair\n");
    try {
        flowlab::parse_config_file(bad);
        CHECK(false);
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::filesystem::remove(bad);

    CHECK_THROWS_AS(flowlab::parse_config_file("/no/such/config.cfg"), flowlab::IoError);
}

TEST_CASE("out-of-range values raise errors naming the key") {
    RunConfig cfg;
    cfg.ema_mu = 1.5;
    try {
        flowlab::validate_config(cfg);
        CHECK(false);
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()) == "ema_mu out of [0,1]");
    }

    cfg = RunConfig{};
    cfg.t_trunc = -0.1;
    CHECK_THROWS_AS(flowlab::validate_config(cfg), UsageError);
    cfg = RunConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(flowlab::validate_config(cfg), UsageError);
    cfg = RunConfig{};
    cfg.dataset = "nope";
    CHECK_THROWS_AS(flowlab::validate_config(cfg), UsageError);
    cfg = RunConfig{};
    cfg.lambda_rf = -1.0;
    CHECK_THROWS_AS(flowlab::validate_config(cfg), UsageError);
    cfg = RunConfig{};
    flowlab::validate_config(cfg);  // defaults are valid
}

TEST_CASE("unknown keys are rejected by file parse and flag override alike") {
    const std::string path = write_tmp("flowlab_unknown.cfg", "mystery_knob = 3\n");
    try {
        flowlab::parse_config_file(path);
        CHECK(false);
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("unknown config key: mystery_knob") != std::string::npos);
    }
    std::filesystem::remove(path);

    RunConfig cfg;
    CHECK_THROWS_AS(flowlab::apply_override(cfg, "mystery_knob", "3"), UsageError);
    CHECK_THROWS_AS(flowlab::apply_override(cfg, "iters", "not-a-number"), UsageError);
}

TEST_CASE("overrides take precedence over the file") {
    const std::string path = write_tmp("flowlab_prec.cfg", "iters = 100\n");
    RunConfig cfg = flowlab::parse_config_file(path);
    CHECK(cfg.iters == 100);
    flowlab::apply_override(cfg, "iters", "200");
    CHECK(cfg.iters == 200);
    std::filesystem::remove(path);
}

TEST_CASE("serialization round-trips every key bit-exactly") {
    RunConfig cfg;
    cfg.dataset = "spiral";
    cfg.iters = 777;
    cfg.lr_student = 3.333333333333333e-4;
    cfg.lambda_bi = 0.1 + 0.2;  // deliberately non-representable nicely
    cfg.seed = 18446744073709551615ULL;
    cfg.out = "runs/exp 1";
    cfg.teacher_ckpt = "runs/teacher.ckpt";

    const std::string text = flowlab::serialize_config(cfg);
    const RunConfig back = flowlab::parse_config_text(text);
    CHECK(back == cfg);
    CHECK(flowlab::serialize_config(back) == text);

    // Serialized form covers exactly the documented keys.
    for (const auto& key : flowlab::config_keys()) {
        CHECK(text.find(key + " = ") != std::string::npos);
    }
}

TEST_CASE("every registered key accepts an override of its own serialized value") {
    RunConfig cfg;
    const std::string text = flowlab::serialize_config(cfg);
    std::istringstream lines(text);
    std::string line;
    RunConfig target;
    while (std::getline(lines, line)) {
        const auto eq = line.find(" = ");
        REQUIRE(eq != std::string::npos);
        flowlab::apply_override(target, line.substr(0, eq), line.substr(eq + 3));
    }
    CHECK(target == cfg);
}
