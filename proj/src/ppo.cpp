#include "icl/ppo.hpp"

#include <cmath>
#include <sstream>

#include "icl/metrics.hpp"

namespace icl {

double kl_step(const RetrievalHead& head, const Vec& state, const Mask& mask) {
    const Vec logp = log_softmax(policy_logits(head.weights(), state), &mask);
    const Vec logq = log_softmax(policy_logits(head.reference(), state), &mask);
    double kl = 0;
    for (Eigen::Index i = 0; i < logp.size(); ++i) {
        if (!mask(i)) continue;
        const double p = std::exp(logp(i));
        if (p > 0) kl += p * (logp(i) - logq(i));
    }
    return std::max(0.0, kl);
}

StepReturns compute_returns(const Episode& episode, double terminal_reward, double beta) {
    const std::size_t k = episode.steps.size();
    StepReturns out;
    out.rewards.resize(k);
    out.returns.resize(k);
    for (std::size_t t = 0; t < k; ++t) out.rewards[t] = -beta * (episode.steps[t].logp - episode.steps[t].logp_ref);
    if (k > 0) out.rewards[k - 1] += terminal_reward;
    double acc = 0;
    for (std::size_t t = k; t-- > 0;) {
        acc += out.rewards[t];
        out.returns[t] = acc;
    }
    return out;
}

void whiten(std::vector<double>& values) {
    if (values.empty()) return;
    const double n = static_cast<double>(values.size());
    double mean = 0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= n;
    const double scale = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
    for (double& v : values) v = (v - mean) * scale;
}

std::vector<Trajectory> make_batch(std::vector<Episode> episodes, const std::vector<double>& terminal_rewards,
                                   double beta) {
    if (episodes.size() != terminal_rewards.size())
        throw Error("shape_mismatch", "one terminal reward per episode required");
    std::vector<Trajectory> batch;
    std::vector<double> flat;
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        Trajectory tr;
        tr.terminal_reward = terminal_rewards[e];
        const auto ret = compute_returns(episodes[e], terminal_rewards[e], beta);
        for (std::size_t t = 0; t < episodes[e].steps.size(); ++t) {
            tr.steps.push_back(Transition{0, ret.returns[t], episodes[e].steps[t].logp});
            flat.push_back(ret.returns[t]);
        }
        tr.episode = std::move(episodes[e]);
        batch.push_back(std::move(tr));
    }
    whiten(flat);
    std::size_t i = 0;
    for (auto& tr : batch)
        for (auto& s : tr.steps) s.advantage = flat[i++];
    return batch;
}

Surrogate ppo_surrogate(const Matrix& weights, const std::vector<Trajectory>& batch, const PpoConfig& cfg) {
    Surrogate out;
    out.grad = Matrix::Zero(weights.rows(), weights.cols());
    std::size_t count = 0;
    for (const auto& tr : batch) count += tr.steps.size();
    if (count == 0) return out;
    const double inv = 1.0 / static_cast<double>(count);
    std::size_t clipped = 0;

    for (const auto& tr : batch) {
        for (std::size_t t = 0; t < tr.steps.size(); ++t) {
            const Step& step = tr.episode.steps[t];
            const Transition& x = tr.steps[t];
            const Vec logp = log_softmax(policy_logits(weights, step.state), &step.mask);
            Vec probs = Vec::Zero(logp.size());
            double entropy = 0;
            for (Eigen::Index i = 0; i < logp.size(); ++i) {
                if (!step.mask(i)) continue;
                probs(i) = std::exp(logp(i));
                if (probs(i) > 0) entropy -= probs(i) * logp(i);
            }

            const double ratio = std::exp(logp(step.action) - x.old_logp);
            const double bounded = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
            const double plain = ratio * x.advantage;
            const double capped = bounded * x.advantage;
            out.loss -= std::min(plain, capped) * inv;
            out.loss -= cfg.entropy_coef * entropy * inv;
            out.entropy += entropy * inv;
            if (std::abs(ratio - 1.0) > cfg.clip) ++clipped;

            // d loss / d logits
            Vec dlogits = Vec::Zero(logp.size());
            const bool frozen = (x.advantage > 0 && ratio > 1.0 + cfg.clip) || (x.advantage < 0 && ratio < 1.0 - cfg.clip);
            if (!frozen) {
                // d(rho A)/d logp(a) = rho A, d logp(a)/d logits = onehot(a) - pi
                dlogits = -plain * inv * (-probs);
                dlogits(step.action) += -plain * inv;
            }
            if (cfg.entropy_coef != 0) {
                for (Eigen::Index i = 0; i < logp.size(); ++i)
                    if (step.mask(i) && probs(i) > 0)
                        dlogits(i) -= cfg.entropy_coef * inv * (-probs(i) * (logp(i) + entropy));
            }
            out.grad.noalias() += dlogits * step.state.transpose();
        }
    }
    out.clip_fraction = static_cast<double>(clipped) * inv;
    return out;
}

PpoStats ppo_update(RetrievalHead& head, const std::vector<Trajectory>& batch, const PpoConfig& cfg,
                    AdamState<double>& adam) {
    PpoStats stats;
    std::size_t steps = 0;
    for (const auto& tr : batch) {
        stats.mean_reward += tr.terminal_reward;
        for (const auto& s : tr.episode.steps) {
            stats.mean_kl += kl_step(head, s.state, s.mask);
            ++steps;
        }
    }
    if (!batch.empty()) {
        stats.mean_reward /= static_cast<double>(batch.size());
        for (const auto& tr : batch) stats.reward_var += std::pow(tr.terminal_reward - stats.mean_reward, 2);
        stats.reward_var /= static_cast<double>(batch.size());
    }
    if (steps) stats.mean_kl /= static_cast<double>(steps);

    for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
        const Surrogate s = ppo_surrogate(head.weights(), batch, cfg);
        if (!std::isfinite(s.loss) || !all_finite(s.grad)) {
            std::ostringstream msg;
            msg << "non-finite PPO loss (loss=" << s.loss << ", epoch=" << epoch << ", batch=" << batch.size()
                << ", max|W|=" << head.weights().cwiseAbs().maxCoeff() << ")";
            throw Error("nan_loss", msg.str());
        }
        if (epoch == 0) stats.entropy = s.entropy;
        stats.clip_fraction = s.clip_fraction;
        Eigen::Map<Vec> params(head.weights().data(), head.weights().size());
        adam_step<double>(adam, params, Eigen::Map<const Vec>(s.grad.data(), s.grad.size()));
    }
    return stats;
}

std::vector<PpoRecord> train_ppo(RetrievalHead& head, const RewardHeadModel* reward_head, const Backend& backend,
                                 StateCache& cache, const std::vector<Query>& train, const std::vector<Query>& dev,
                                 const PpoConfig& cfg, Rng& rng) {
    if (cfg.source == RewardSource::reward_head && !reward_head)
        throw Error("missing_reward_head", "reward-head rewards requested but no trained reward head is available");
    if (cfg.beta < 0) throw Error("invalid_argument", "beta must be >= 0");
    if (!(cfg.clip > 0 && cfg.clip < 1)) throw Error("invalid_argument", "clip epsilon must lie in (0,1)");
    std::vector<PpoRecord> curves;
    if (cfg.total_steps <= 0) return curves;
    if (train.empty()) throw Error("empty_dataset", "PPO needs training queries");

    AdamState<double> adam(head.weights().size(), cfg.lr);
    std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);

    for (int step = 1; step <= cfg.total_steps; ++step) {
        std::vector<Episode> episodes;
        std::vector<double> terminal;
        episodes.reserve(static_cast<std::size_t>(cfg.batch));
        for (int b = 0; b < cfg.batch; ++b) {
            const Query& q = train[pick(rng)];
            Episode ep = rollout(head, backend, q, cfg.k, rng, &cache);
            const IdTuple ids = ep.actions();
            const double r = cfg.source == RewardSource::reward_head
                                 ? reward_head->normalized(reward_of(*reward_head, backend, cache, q, ids))
                                 : cached_score(cache, backend, q, ids)(q.gold_label);
            terminal.push_back(r);
            episodes.push_back(std::move(ep));
        }
        const auto batch = make_batch(std::move(episodes), terminal, cfg.beta);
        const PpoStats stats = ppo_update(head, batch, cfg, adam);

        PpoRecord rec{step, stats.mean_reward, stats.reward_var, stats.mean_kl, stats.entropy, stats.clip_fraction,
                      std::nan("")};
        if (!dev.empty() && cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.total_steps)) {
            std::vector<IdTuple> picks;
            for (const auto& q : dev) picks.push_back(greedy_decode(head, backend, q, cfg.k, &cache));
            rec.dev_accuracy = accuracy(backend, picks, dev, &cache);
        }
        curves.push_back(rec);
    }
    return curves;
}

}  // namespace icl
