// Command-line driver: task generation, two-stage training, evaluation, oracle and k-sweep.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "icl/pipeline.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::string preset;
    std::map<std::string, std::string> keys;
};

icl::RunConfig resolve(const Overrides& o) {
    icl::RunConfig cfg;
    if (!o.preset.empty()) icl::apply_preset(cfg, o.preset);
    if (!o.config_path.empty()) cfg = icl::load_config(o.config_path, cfg);
    if (const char* env = std::getenv("ICL_OUTPUT_DIR"); env && *env) cfg.out_dir = env;
    for (const auto& [key, value] : o.keys) icl::set_key(cfg, key, value);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential demonstration retrieval trained from self-preference"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    app.add_option("-c,--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--preset", o.preset, "full or toy (applied before the config file)");
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> key_opts;
    for (const auto& key : icl::config_keys())
        key_opts[key.name] = app.add_option("--" + key.name, raw[key.name], key.help)->group("Config overrides");

    auto* gen = app.add_subcommand("gen-task", "write corpus/train/test JSONL for the synthetic task");
    auto* init = app.add_subcommand("init", "checkpoint with the head initialized from demonstration embeddings");
    auto* reward = app.add_subcommand("train-reward", "stage 1: candidate trees, preference pairs, reward head");
    auto* ppo = app.add_subcommand("train-ppo", "stage 2: PPO on the retrieval head");
    bool no_reward_model = false;
    ppo->add_flag("--no-reward-model", no_reward_model, "use raw log P(gold|z,x) as the reward");
    auto* eval = app.add_subcommand("eval", "compare selection methods on the test queries");
    auto* orc = app.add_subcommand("oracle", "exhaustive best tuple per test query");
    auto* sweep = app.add_subcommand("sweep-k", "stage-1 cost and accuracy across k");
    auto* show = app.add_subcommand("show-config", "print the resolved configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        for (const auto& [name, opt] : key_opts)
            if (opt->count() > 0) o.keys[name] = raw[name];
        const icl::RunConfig cfg = resolve(o);
        const std::string hash = icl::config_hash(cfg);

        if (*gen) {
            const auto task = icl::cmd_gen_task(cfg);
            std::cout << "wrote " << task.corpus.size() << " demonstrations, " << task.train.size() << " train and "
                      << task.test.size() << " test queries to " << cfg.out_dir << " (config " << hash << ")\n";
        } else if (*init) {
            const auto ckpt = icl::cmd_init(cfg);
            std::cout << "initialized head " << ckpt.head.size() << "x" << ckpt.head.dim() << " -> "
                      << cfg.checkpoint_file() << '\n';
        } else if (*reward) {
            icl::cmd_train_reward(cfg);
            std::cout << "reward head trained -> " << cfg.checkpoint_file() << ", history "
                      << cfg.out_file("reward_history.csv") << '\n';
        } else if (*ppo) {
            icl::cmd_train_ppo(cfg, no_reward_model);
            std::cout << "retrieval head trained" << (no_reward_model ? " (raw log-prob rewards)" : "") << " -> "
                      << cfg.checkpoint_file() << ", curves " << cfg.out_file("ppo_curves.csv") << '\n';
        } else if (*eval) {
            const auto reports = icl::cmd_eval(cfg);
            std::cout << icl::report_table(reports);
        } else if (*orc) {
            const auto results = icl::cmd_oracle(cfg);
            std::cout << "oracle tuples for " << results.size() << " queries -> " << cfg.out_file("oracle.csv") << '\n';
        } else if (*sweep) {
            const auto rows = icl::cmd_sweep_k(cfg, icl::parse_int_list(cfg.k_list));
            for (const auto& r : rows)
                std::cout << "k=" << r.k << " m=" << r.m << " stage1=" << r.stage1_seconds << "s accuracy=" << r.accuracy
                          << '\n';
        } else if (*show) {
            std::cout << icl::to_text(cfg) << "# config_hash=" << hash << '\n';
        }
    } catch (const icl::Error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
