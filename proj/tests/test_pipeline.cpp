#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "icl/pipeline.hpp"
#include "util.hpp"

using namespace icl;

namespace {

RunConfig tiny(const testing::TempDir& dir) {
    RunConfig cfg;
    apply_preset(cfg, "toy");
    cfg.task = TaskSpec{.dim = 4, .num_classes = 2, .corpus_size = 12, .n_train = 30, .n_test = 20, .noise = 0.2, .seed = 3};
    cfg.reward_hidden = 8;
    cfg.reward.epochs = 5;
    cfg.ppo.total_steps = 5;
    cfg.ppo.batch = 8;
    cfg.dev_size = 5;
    cfg.out_dir = dir.path.string();
    return cfg;
}

struct Run {
    int status = -1;
    std::string out, err;
};

Run cli(const testing::TempDir& dir, const std::string& args) {
    const std::string out = dir.file("stdout.txt"), err = dir.file("stderr.txt");
    const std::string cmd = std::string(ICL_CLI) + " " + args + " >" + out + " 2>" + err;
    const int raw = std::system(cmd.c_str());
    return Run{WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, testing::read_file(out), testing::read_file(err)};
}

std::string tiny_flags(const testing::TempDir& dir) {
    return "--preset toy --dim 4 --num_classes 2 --corpus_size 12 --n_train 30 --n_test 20 --noise 0.2 --task_seed 3 "
           "--reward_hidden 8 --reward_epochs 5 --ppo_steps 5 --ppo_batch 8 --dev_size 5 --out_dir " +
           dir.path.string();
}

}  // namespace

TEST_CASE("commands chain through the files they write") {
    testing::TempDir dir("flow");
    const RunConfig cfg = tiny(dir);
    const Task task = cmd_gen_task(cfg);
    CHECK(task.corpus.size() == 12);

    const Checkpoint init = cmd_init(cfg);
    CHECK(init.stage == "init");
    CHECK_FALSE(init.reward_head.has_value());
    CHECK_THROWS_AS(cmd_train_ppo(cfg, false), Error);

    const Checkpoint rewarded = cmd_train_reward(cfg);
    CHECK(rewarded.stage == "reward");
    REQUIRE(rewarded.reward_head.has_value());
    CHECK(std::filesystem::exists(cfg.out_file("reward_history.csv")));

    const Checkpoint trained = cmd_train_ppo(cfg, false);
    CHECK(trained.stage == "ppo");
    CHECK(same(trained.head.reference(), init.head.weights()));
    CHECK(*trained.reward_head == *rewarded.reward_head);
    CHECK(load_checkpoint(cfg.checkpoint_file()) == trained);

    const auto reports = cmd_eval(cfg);
    REQUIRE(reports.size() == 5);
    CHECK(reports.back().method == "oracle");
    for (const auto& r : reports) CHECK(r.accuracy <= reports.back().accuracy);
    const std::string eval = testing::read_file(cfg.out_file("eval.csv"));
    CHECK(eval.rfind("# config_hash=" + config_hash(cfg) + "\n", 0) == 0);

    const auto oracles = cmd_oracle(cfg);
    CHECK(oracles.size() == 20);
    for (const char* name : {"ppo_curves.csv", "eval_detail.csv", "oracle.csv", "ppo_kl.svg", "reward_history.svg"})
        CHECK_MESSAGE(std::filesystem::exists(cfg.out_file(name)), name);
}

TEST_CASE("a checkpoint from another corpus is refused") {
    testing::TempDir dir("mismatch");
    RunConfig cfg = tiny(dir);
    cmd_gen_task(cfg);
    cmd_init(cfg);
    cfg.task.seed = 4;
    cmd_gen_task(cfg);
    try {
        cmd_eval(cfg);
        FAIL("expected task_mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == "task_mismatch");
    }
}

TEST_CASE("sweep-k leaf counts follow the widths") {
    testing::TempDir dir("sweep");
    RunConfig cfg = tiny(dir);
    cfg.ppo.total_steps = 2;
    CHECK(widths_for(cfg, 1) == std::vector<int>{3});
    CHECK(widths_for(cfg, 5) == std::vector<int>{3, 2, 2, 2, 2});
    cmd_gen_task(cfg);
    const auto rows = cmd_sweep_k(cfg, {1, 3});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].m == 3);
    CHECK(rows[1].m == 12);
    // one leaf set per stage-1 query
    CHECK(rows[0].leaves_scored == 3 * 30);
    CHECK(rows[1].leaves_scored == 12 * 30);
    CHECK(testing::read_file(cfg.out_file("sweep_k.csv")).find("k,m,leaves_scored,stage1_seconds,accuracy\n") !=
          std::string::npos);
}

TEST_CASE("cli exit codes and messages") {
    testing::TempDir dir("cli");
    const std::string flags = tiny_flags(dir);

    auto r = cli(dir, flags + " gen-task");
    CHECK(r.status == 0);
    CHECK(r.out.find("wrote 12 demonstrations") != std::string::npos);

    r = cli(dir, flags + " eval");
    CHECK(r.status == 2);
    CHECK(r.err.rfind("error: io: ", 0) == 0);

    CHECK(cli(dir, flags + " init").status == 0);
    r = cli(dir, flags + " train-ppo");
    CHECK(r.status == 2);
    CHECK(r.err.rfind("error: missing_reward_head: ", 0) == 0);
    CHECK(cli(dir, flags + " train-ppo --no-reward-model").status == 0);

    r = cli(dir, flags + " eval");
    CHECK(r.status == 0);
    CHECK(r.out.find("oracle") != std::string::npos);

    r = cli(dir, flags + " --k 2 eval");
    CHECK(r.status == 2);
    CHECK(r.err.rfind("error: invalid_config: ", 0) == 0);

    r = cli(dir, flags + " --beta nope show-config");
    CHECK(r.status == 2);
    CHECK(r.err.rfind("error: bad_config_value: ", 0) == 0);

    r = cli(dir, flags + " --methods random,magic eval");
    CHECK(r.status == 2);
    CHECK(r.err.rfind("error: unknown_method: ", 0) == 0);

    CHECK(cli(dir, "").status != 0);
    CHECK(cli(dir, "frobnicate").status != 0);

    r = cli(dir, flags + " show-config");
    CHECK(r.status == 0);
    RunConfig expected = tiny(dir);
    CHECK(r.out == to_text(expected) + "# config_hash=" + config_hash(expected) + "\n");
}

TEST_CASE("config file and environment output directory") {
    testing::TempDir dir("cfgfile");
    testing::write_file(dir.file("run.cfg"), "preset = toy\nk = 2\nwidths = 2,2\n");
    const std::string env_dir = dir.file("from-env");
    const std::string cmd = "ICL_OUTPUT_DIR=" + env_dir + " " + std::string(ICL_CLI) + " -c " + dir.file("run.cfg") +
                            " show-config >" + dir.file("o.txt") + " 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    const std::string text = testing::read_file(dir.file("o.txt"));
    CHECK(text.find("k = 2\n") != std::string::npos);
    CHECK(text.find("widths = 2,2\n") != std::string::npos);
    CHECK(text.find("out_dir = " + env_dir + "\n") != std::string::npos);
}
