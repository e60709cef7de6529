#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "icl/backend.hpp"
#include "icl/corpus.hpp"
#include "icl/ppo.hpp"
#include "icl/reward.hpp"

namespace icl {

/// Every tunable of a run. Defaults are the full-scale experiment values; the "toy" preset
/// scales the task and model down to desk size.
struct RunConfig {
    std::string preset = "full";

    TaskSpec task{.dim = 16, .num_classes = 2, .corpus_size = 5000, .n_train = 1000, .n_test = 1000, .noise = 0.1, .seed = 1};
    ToyLmParams backend;

    int k = 3;
    std::vector<int> widths{3, 2, 2};

    int reward_hidden = 8192;
    int max_pairs = 32;
    double tie_tolerance = 1e-6;
    double holdout_fraction = 0.2;
    RewardTrainConfig reward{.epochs = 100, .batch = 32, .lr = 1e-3};

    PpoConfig ppo;
    int dev_size = 50;

    std::uint64_t train_seed = 7;
    std::uint64_t eval_seed = 11;

    std::string methods = "random,bm25,initial,trained,oracle";
    std::string k_list = "1,2,3";

    std::string out_dir = "out";
    std::string corpus_path;      // default: <out_dir>/corpus.jsonl
    std::string train_path;       // default: <out_dir>/train.jsonl
    std::string test_path;        // default: <out_dir>/test.jsonl
    std::string checkpoint_path;  // default: <out_dir>/checkpoint.json

    std::string corpus_file() const;
    std::string train_file() const;
    std::string test_file() const;
    std::string checkpoint_file() const;
    std::string out_file(const std::string& name) const;

    /// Checks |widths| == k and ranges of every numeric key.
    void validate() const;
};

struct ConfigKey {
    std::string name;
    std::string help;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<ConfigKey>& config_keys();

void apply_preset(RunConfig& cfg, const std::string& name);

/// Sets one key from its textual value; unknown keys and unparsable values throw.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// "key = value" lines, '#' comments. A preset line is applied before the other keys.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Canonical "key = value" listing in key order; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& cfg);

/// 16 hex digits identifying the run configuration (paths excluded).
std::string config_hash(const RunConfig& cfg);

std::vector<int> parse_int_list(const std::string& text);

}  // namespace icl
