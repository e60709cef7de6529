#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "icl/retrieval.hpp"

namespace icl {

struct PreferencePair {
    int query_id = 0;
    IdTuple plus;   // ranked strictly above minus
    IdTuple minus;
    double gap = 0;  // log P(gold|plus) - log P(gold|minus) > tie tolerance
};

inline constexpr std::size_t kUnlimitedPairs = std::numeric_limits<std::size_t>::max();

/// All (a, b) with rank(a) < rank(b) and score gap > tie_tolerance, subsampled uniformly
/// without replacement down to max_pairs. Output is ordered by (rank(a), rank(b)).
std::vector<PreferencePair> build_pairs(const CandidateSet& cs, std::size_t max_pairs, double tie_tolerance, Rng& rng);

/// Scalar reward on the pooled state of the full context [z, x], with frozen output statistics
/// used to z-normalize rewards for policy optimization.
struct RewardHeadModel {
    Mlp2<double> mlp;
    double mean = 0;
    double var = 1;

    RewardHeadModel() = default;
    RewardHeadModel(int input_dim, int hidden) : mlp(input_dim, hidden) {}

    double raw(const Vec& state) const { return mlp.forward(state); }
    double normalized(double raw_value) const { return (raw_value - mean) / std::sqrt(var + 1e-12); }

    friend bool operator==(const RewardHeadModel&, const RewardHeadModel&) = default;
};

double reward_of(const RewardHeadModel& rh, const Backend& backend, StateCache& cache, const Query& query,
                 std::span<const int> ids);

struct BtLoss {
    double loss = 0;
    double margin = 0;  // r(plus) - r(minus)
    Mlp2Grad<double> grad;
};

/// -log sigmoid(r(plus) - r(minus)) and its gradient through both branches.
BtLoss bt_loss(const Mlp2<double>& mlp, const Vec& plus_state, const Vec& minus_state);
BtLoss bt_loss(const RewardHeadModel& rh, const Backend& backend, StateCache& cache, const Query& query,
               const PreferencePair& pair);

/// Pooled states of one preference pair.
struct PreferenceExample {
    Vec plus;
    Vec minus;
};

struct RewardTrainConfig {
    int epochs = 100;
    int batch = 32;
    double lr = 1e-3;
};

struct RewardEpoch {
    int epoch = 0;
    double loss = 0;          // mean loss over the training pairs after the epoch
    double train_acc = 0;
    double holdout_acc = 0;   // fraction of held-out pairs with r(plus) > r(minus); NaN when empty
};

/// Shuffled mini-batch Adam on the Bradley-Terry loss.
std::vector<RewardEpoch> train_reward(RewardHeadModel& rh, const std::vector<PreferenceExample>& train,
                                      const std::vector<PreferenceExample>& holdout, const RewardTrainConfig& cfg,
                                      Rng& rng);

double pair_accuracy(const Mlp2<double>& mlp, const std::vector<PreferenceExample>& pairs);

/// Freezes mean/variance of raw rewards over the given states.
void fit_normalization(RewardHeadModel& rh, const std::vector<Vec>& states);

struct PreferenceData {
    std::vector<CandidateSet> sets;
    std::vector<PreferencePair> pairs;
};

/// Samples a candidate tree per query under the head's current policy and builds ranked pairs.
PreferenceData collect_preferences(const RetrievalHead& head, const Backend& backend, StateCache& cache,
                                   const std::vector<Query>& queries, std::span<const int> widths,
                                   std::size_t max_pairs, double tie_tolerance, Rng& rng);

std::vector<PreferenceExample> to_examples(const std::vector<PreferencePair>& pairs, const Backend& backend,
                                           StateCache& cache, const std::vector<Query>& queries);

}  // namespace icl
