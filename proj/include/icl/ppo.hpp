#pragma once

#include <string>
#include <vector>

#include "icl/reward.hpp"

namespace icl {

enum class RewardSource { reward_head, raw_logprob };

struct PpoConfig {
    double beta = 1e-3;  // KL penalty towards the reference head
    double clip = 0.2;
    int epochs_per_batch = 4;
    int batch = 32;  // episodes per update
    int total_steps = 10000;
    double lr = 1e-4;
    double entropy_coef = 0;
    RewardSource source = RewardSource::reward_head;
    int k = 3;
    int eval_every = 100;  // greedy dev accuracy cadence, in updates
};

/// KL(pi_M(.|state) || pi_ref(.|state)) over the allowed actions.
double kl_step(const RetrievalHead& head, const Vec& state, const Mask& mask);

struct StepReturns {
    std::vector<double> rewards;  // shaped per-step rewards
    std::vector<double> returns;  // undiscounted reward-to-go
};

/// r_t = -beta * (log pi_M - log pi_ref)(a_t); the terminal reward is added at the last step.
StepReturns compute_returns(const Episode& episode, double terminal_reward, double beta);

/// Shifts to zero mean and scales to unit variance (centering only when the variance is zero).
void whiten(std::vector<double>& values);

struct Transition {
    double advantage = 0;
    double ret = 0;
    double old_logp = 0;
};

struct Trajectory {
    Episode episode;
    std::vector<Transition> steps;
    double terminal_reward = 0;
};

/// Builds returns for every episode and whitens advantages across the whole batch.
std::vector<Trajectory> make_batch(std::vector<Episode> episodes, const std::vector<double>& terminal_rewards,
                                   double beta);

struct Surrogate {
    double loss = 0;
    Matrix grad;  // d loss / d weights
    double clip_fraction = 0;
    double entropy = 0;
};

/// Clipped surrogate -mean(min(rho A, clip(rho) A)) - entropy_coef * mean H over all steps, with its gradient.
Surrogate ppo_surrogate(const Matrix& weights, const std::vector<Trajectory>& batch, const PpoConfig& cfg);

struct PpoStats {
    double mean_reward = 0;
    double reward_var = 0;
    double mean_kl = 0;
    double entropy = 0;
    double clip_fraction = 0;
};

/// epochs_per_batch Adam steps on the surrogate; only the trainable weights move.
PpoStats ppo_update(RetrievalHead& head, const std::vector<Trajectory>& batch, const PpoConfig& cfg,
                    AdamState<double>& adam);

struct PpoRecord {
    int step = 0;
    double mean_reward = 0;
    double reward_var = 0;
    double mean_kl = 0;
    double entropy = 0;
    double clip_fraction = 0;
    double dev_accuracy = 0;  // NaN between evaluations
};

/// Rollout, reward, update loop. `reward_head` may be null only for RewardSource::raw_logprob.
std::vector<PpoRecord> train_ppo(RetrievalHead& head, const RewardHeadModel* reward_head, const Backend& backend,
                                 StateCache& cache, const std::vector<Query>& train, const std::vector<Query>& dev,
                                 const PpoConfig& cfg, Rng& rng);

}  // namespace icl
