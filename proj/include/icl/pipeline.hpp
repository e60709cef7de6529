#pragma once

#include <string>
#include <vector>

#include "icl/baselines.hpp"
#include "icl/checkpoint.hpp"
#include "icl/config.hpp"
#include "icl/metrics.hpp"

namespace icl {

struct Workspace {
    Corpus corpus;
    std::vector<Query> train;
    std::vector<Query> test;
};

Workspace load_workspace(const RunConfig& cfg);

struct Stage1Result {
    RewardHeadModel reward_head;
    std::vector<RewardEpoch> history;
    PreferenceData data;
    double collect_seconds = 0;  // candidate-tree sampling and scoring only
    std::size_t leaves_scored = 0;
};

/// Candidate trees under the head's current policy, pairwise preferences, Bradley-Terry fit and
/// frozen reward normalization. The last holdout_fraction of the queries only feeds held-out accuracy.
Stage1Result run_stage1(const RetrievalHead& head, const Backend& backend, StateCache& cache,
                        const std::vector<Query>& train, const RunConfig& cfg, Rng& rng);

/// PPO on the retrieval head; the dev slice is the first dev_size training queries.
std::vector<PpoRecord> run_stage2(RetrievalHead& head, const RewardHeadModel* reward_head, const Backend& backend,
                                  StateCache& cache, const std::vector<Query>& train, const RunConfig& cfg, Rng& rng);

/// Both stages from a fresh head. Stage seeds derive from cfg.train_seed.
struct TrainedModels {
    RetrievalHead head;
    std::optional<RewardHeadModel> reward_head;
    std::vector<RewardEpoch> reward_history;
    std::vector<PpoRecord> curves;
};

TrainedModels train_pipeline(const Workspace& ws, const Backend& backend, const RunConfig& cfg, bool use_reward_model);

Rng stage1_rng(const RunConfig& cfg);
Rng stage2_rng(const RunConfig& cfg);

/// Selection rules by name: random, bm25, initial, trained, oracle.
std::vector<Method> make_methods(const std::vector<std::string>& names, const RunConfig& cfg, const Backend& backend,
                                 const RetrievalHead& head, StateCache* cache);

std::vector<std::string> split_names(const std::string& text);

std::string reward_history_csv(const std::vector<RewardEpoch>& history, const std::string& config_hash);
std::string ppo_curves_csv(const std::vector<PpoRecord>& curves, const std::string& config_hash);

// Command implementations; each reads and writes the files named by the config.
Task cmd_gen_task(const RunConfig& cfg);
Checkpoint cmd_init(const RunConfig& cfg);
Checkpoint cmd_train_reward(const RunConfig& cfg);
Checkpoint cmd_train_ppo(const RunConfig& cfg, bool no_reward_model);
std::vector<EvalReport> cmd_eval(const RunConfig& cfg);
std::vector<OracleResult> cmd_oracle(const RunConfig& cfg);

struct SweepRow {
    int k = 0;
    long m = 0;
    std::size_t leaves_scored = 0;
    double stage1_seconds = 0;
    double accuracy = 0;
};

std::vector<SweepRow> cmd_sweep_k(const RunConfig& cfg, const std::vector<int>& k_list);

/// Widths for a given k: the configured prefix, padded with the last configured width.
std::vector<int> widths_for(const RunConfig& cfg, int k);

void write_text(const std::string& path, const std::string& text);

}  // namespace icl
