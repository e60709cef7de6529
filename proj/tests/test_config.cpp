#include <doctest.h>

#include <limits>

#include "icl/checkpoint.hpp"
#include "icl/config.hpp"
#include "util.hpp"

using namespace icl;

namespace {

std::string code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

}  // namespace

TEST_CASE("config text round-trips") {
    for (const char* preset : {"full", "toy"}) {
        RunConfig cfg;
        apply_preset(cfg, preset);
        cfg.ppo.lr = 0.1 + 0.2;  // not exactly representable in short decimal form
        cfg.widths = {4, 1, 2};
        cfg.methods = "random,oracle";
        cfg.checkpoint_path = "/tmp/x.json";
        const RunConfig back = parse_config(to_text(cfg));
        CHECK(to_text(back) == to_text(cfg));
        CHECK(back.ppo.lr == cfg.ppo.lr);
        CHECK(back.preset == preset);
        CHECK(config_hash(back) == config_hash(cfg));
    }
}

TEST_CASE("preset line applies before the other keys") {
    const RunConfig cfg = parse_config("k = 2\nwidths = 3,2\n# comment\npreset = toy   # trailing\n");
    CHECK(cfg.preset == "toy");
    CHECK(cfg.k == 2);
    CHECK(cfg.widths == std::vector<int>{3, 2});
    CHECK(cfg.task.corpus_size == 50);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config errors carry stable codes") {
    CHECK(code_of([] { parse_config("nope = 1\n"); }) == "unknown_config_key");
    CHECK(code_of([] { parse_config("k = three\n"); }) == "bad_config_value");
    CHECK(code_of([] { parse_config("k = 3x\n"); }) == "bad_config_value");
    CHECK(code_of([] { parse_config("just words\n"); }) == "bad_config_line");
    CHECK(code_of([] { parse_config("preset = huge\n"); }) == "bad_config_value");
    CHECK(code_of([] { parse_config("reward_source = maybe\n"); }) == "bad_config_value");
    CHECK(code_of([] { load_config("/nonexistent/cfg.txt"); }) == "io");
}

TEST_CASE("validation rejects inconsistent settings") {
    RunConfig cfg;
    apply_preset(cfg, "toy");
    CHECK_NOTHROW(cfg.validate());
    auto broken = [&](auto mutate) {
        RunConfig c = cfg;
        mutate(c);
        return code_of([&] { c.validate(); });
    };
    CHECK(broken([](RunConfig& c) { c.k = 2; }) == "invalid_config");
    CHECK(broken([](RunConfig& c) { c.widths = {3, 0, 2}; }) == "invalid_config");
    CHECK(broken([](RunConfig& c) { c.ppo.clip = 1.0; }) == "invalid_config");
    CHECK(broken([](RunConfig& c) { c.ppo.beta = -1; }) == "invalid_config");
    CHECK(broken([](RunConfig& c) { c.holdout_fraction = 1.0; }) == "invalid_config");
    CHECK(broken([](RunConfig& c) { c.k = 60, c.widths.assign(60, 1); }) == "invalid_config");
}

TEST_CASE("config hash ignores paths and tracks everything else") {
    RunConfig a;
    RunConfig b = a;
    b.out_dir = "elsewhere";
    b.corpus_path = "c.jsonl";
    b.checkpoint_path = "ck.json";
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    for (const auto& key : config_keys()) {
        if (key.name == "out_dir" || key.name.ends_with("_path")) continue;
        RunConfig c = a;
        const std::string before = key.get(c);
        std::string changed = "2";
        if (key.name == "widths") changed = "1,1,1";
        if (key.name == "reward_source") changed = "raw_logprob";
        if (key.name == "methods" || key.name == "k_list") changed = "oracle";
        if (before == changed) changed = "3";
        key.set(c, changed);
        CHECK_MESSAGE(config_hash(c) != config_hash(a), key.name);
    }
}

TEST_CASE("path defaults hang off the output directory") {
    RunConfig cfg;
    cfg.out_dir = "runs/a/";
    CHECK(cfg.corpus_file() == "runs/a/corpus.jsonl");
    CHECK(cfg.checkpoint_file() == "runs/a/checkpoint.json");
    cfg.test_path = "t.jsonl";
    CHECK(cfg.test_file() == "t.jsonl");
    CHECK(parse_int_list("1, 2,,3") == std::vector<int>{1, 2, 3});
}

TEST_CASE("checkpoint round-trips bit for bit") {
    Rng rng(4);
    std::normal_distribution<double> g;
    Matrix w(5, 3), ref(5, 3);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng), ref.data()[i] = g(rng) * 1e-300;
    w(0, 0) = std::numeric_limits<double>::denorm_min();
    w(1, 1) = -0.0;

    Checkpoint c;
    c.stage = "ppo";
    c.head = RetrievalHead(w, ref);
    RewardHeadModel rh(3, 4);
    rh.mlp.init_random(rng);
    rh.mean = 1.0 / 3;
    rh.var = 2.0 / 7;
    c.reward_head = rh;
    c.config_text = "preset = toy\nk = 3\n";
    c.task_fingerprint = 0xfedcba9876543210ULL;
    c.task_seed = 1;
    c.train_seed = 7;

    testing::TempDir dir("ckpt");
    save_checkpoint(dir.file("ck.json"), c);
    const Checkpoint back = load_checkpoint(dir.file("ck.json"));
    CHECK(back == c);
    CHECK(std::signbit(back.head.weights()(1, 1)));

    Checkpoint bare;
    CHECK(checkpoint_from_string(checkpoint_to_string(bare)) == bare);
}

TEST_CASE("checkpoint errors") {
    Checkpoint c;
    std::string text = checkpoint_to_string(c);
    const auto at = text.find(kCheckpointVersion);
    text.replace(at, std::string(kCheckpointVersion).size(), "icl-checkpoint/0");
    CHECK(code_of([&] { checkpoint_from_string(text); }) == "version_mismatch");
    CHECK(code_of([] { checkpoint_from_string("{not json"); }) == "corrupt_checkpoint");
    CHECK(code_of([] { checkpoint_from_string(R"({"version":"icl-checkpoint/1"})"); }) == "corrupt_checkpoint");
    CHECK(code_of([] { load_checkpoint("/nonexistent/ck.json"); }) == "io");
}
