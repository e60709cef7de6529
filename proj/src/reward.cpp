#include "icl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace icl {

std::vector<PreferencePair> build_pairs(const CandidateSet& cs, std::size_t max_pairs, double tie_tolerance, Rng& rng) {
    const auto order = cs.order();
    std::vector<PreferencePair> eligible;
    for (std::size_t a = 0; a < order.size(); ++a) {
        for (std::size_t b = a + 1; b < order.size(); ++b) {
            const auto& hi = cs.candidates[order[a]];
            const auto& lo = cs.candidates[order[b]];
            const double gap = hi.score - lo.score;
            if (gap > tie_tolerance) eligible.push_back(PreferencePair{cs.query_id, hi.ids, lo.ids, gap});
        }
    }
    if (eligible.size() <= max_pairs) return eligible;

    std::vector<std::size_t> idx(eligible.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_pairs);
    std::sort(idx.begin(), idx.end());
    std::vector<PreferencePair> out;
    out.reserve(max_pairs);
    for (auto i : idx) out.push_back(std::move(eligible[i]));
    return out;
}

double reward_of(const RewardHeadModel& rh, const Backend& backend, StateCache& cache, const Query& query,
                 std::span<const int> ids) {
    return rh.raw(cached_pool(cache, backend, query, ids));
}

BtLoss bt_loss(const Mlp2<double>& mlp, const Vec& plus_state, const Vec& minus_state) {
    BtLoss out;
    out.margin = mlp.forward(plus_state) - mlp.forward(minus_state);
    out.loss = softplus_neg(out.margin);
    // d/d margin of -log sigmoid(margin) = -sigmoid(-margin)
    const double dmargin = -sigmoid(-out.margin);
    out.grad = mlp.backward(plus_state, dmargin);
    out.grad += mlp.backward(minus_state, -dmargin);
    return out;
}

BtLoss bt_loss(const RewardHeadModel& rh, const Backend& backend, StateCache& cache, const Query& query,
               const PreferencePair& pair) {
    return bt_loss(rh.mlp, cached_pool(cache, backend, query, pair.plus), cached_pool(cache, backend, query, pair.minus));
}

namespace {

struct PairMatrices {
    Matrix plus;
    Matrix minus;
};

PairMatrices stack(const std::vector<PreferenceExample>& pairs, Eigen::Index dim) {
    PairMatrices m{Matrix(static_cast<Eigen::Index>(pairs.size()), dim), Matrix(static_cast<Eigen::Index>(pairs.size()), dim)};
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        m.plus.row(static_cast<Eigen::Index>(i)) = pairs[i].plus.transpose();
        m.minus.row(static_cast<Eigen::Index>(i)) = pairs[i].minus.transpose();
    }
    return m;
}

Vec margins(const Mlp2<double>& mlp, const PairMatrices& m) {
    return mlp.forward_batch(m.plus) - mlp.forward_batch(m.minus);
}

double accuracy_of(const Vec& margin) {
    if (margin.size() == 0) return std::nan("");
    return static_cast<double>((margin.array() > 0).count()) / static_cast<double>(margin.size());
}

}  // namespace

double pair_accuracy(const Mlp2<double>& mlp, const std::vector<PreferenceExample>& pairs) {
    if (pairs.empty()) return std::nan("");
    return accuracy_of(margins(mlp, stack(pairs, mlp.input_dim())));
}

std::vector<RewardEpoch> train_reward(RewardHeadModel& rh, const std::vector<PreferenceExample>& train,
                                      const std::vector<PreferenceExample>& holdout, const RewardTrainConfig& cfg,
                                      Rng& rng) {
    if (train.empty()) throw Error("empty_dataset", "reward training needs at least one preference pair");
    if (cfg.batch < 1 || cfg.epochs < 0) throw Error("invalid_argument", "reward training batch/epochs out of range");

    const Eigen::Index dim = rh.mlp.input_dim();
    const PairMatrices all = stack(train, dim);
    const PairMatrices held = stack(holdout, dim);
    AdamState<double> adam(rh.mlp.num_params(), cfg.lr);
    std::vector<Eigen::Index> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<RewardEpoch> history;
    PairMatrices batch;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            const auto b = static_cast<Eigen::Index>(stop - start);
            batch.plus.resize(b, dim);
            batch.minus.resize(b, dim);
            for (Eigen::Index i = 0; i < b; ++i) {
                batch.plus.row(i) = all.plus.row(order[start + static_cast<std::size_t>(i)]);
                batch.minus.row(i) = all.minus.row(order[start + static_cast<std::size_t>(i)]);
            }
            const Vec margin = margins(rh.mlp, batch);
            // d/d margin of the mean of -log sigmoid(margin)
            Vec up(b);
            for (Eigen::Index i = 0; i < b; ++i) up(i) = -sigmoid(-margin(i)) / static_cast<double>(b);
            auto grad = rh.mlp.backward_batch(batch.plus, up);
            auto grad_minus = rh.mlp.backward_batch(batch.minus, -up);
            grad.w1 += grad_minus.w1;
            grad.b1 += grad_minus.b1;
            grad.w2 += grad_minus.w2;
            grad.b2 += grad_minus.b2;
            Vec params = rh.mlp.flatten();
            adam_step<double>(adam, params, grad.flatten());
            rh.mlp.unflatten(params);
        }
        RewardEpoch rec;
        rec.epoch = epoch;
        const Vec margin = margins(rh.mlp, all);
        for (Eigen::Index i = 0; i < margin.size(); ++i) rec.loss += softplus_neg(margin(i));
        rec.loss /= static_cast<double>(margin.size());
        rec.train_acc = accuracy_of(margin);
        rec.holdout_acc = holdout.empty() ? std::nan("") : accuracy_of(margins(rh.mlp, held));
        history.push_back(rec);
    }
    return history;
}

void fit_normalization(RewardHeadModel& rh, const std::vector<Vec>& states) {
    if (states.empty()) {
        rh.mean = 0;
        rh.var = 1;
        return;
    }
    double sum = 0, sq = 0;
    for (const auto& s : states) {
        const double r = rh.raw(s);
        sum += r;
        sq += r * r;
    }
    const double n = static_cast<double>(states.size());
    rh.mean = sum / n;
    rh.var = std::max(0.0, sq / n - rh.mean * rh.mean);
    if (rh.var < 1e-12) rh.var = 1;
}

PreferenceData collect_preferences(const RetrievalHead& head, const Backend& backend, StateCache& cache,
                                   const std::vector<Query>& queries, std::span<const int> widths,
                                   std::size_t max_pairs, double tie_tolerance, Rng& rng) {
    PreferenceData data;
    for (const auto& q : queries) {
        auto cs = sample_candidate_tree(head, backend, cache, q, widths, rng);
        auto pairs = build_pairs(cs, max_pairs, tie_tolerance, rng);
        data.pairs.insert(data.pairs.end(), std::make_move_iterator(pairs.begin()), std::make_move_iterator(pairs.end()));
        data.sets.push_back(std::move(cs));
    }
    return data;
}

std::vector<PreferenceExample> to_examples(const std::vector<PreferencePair>& pairs, const Backend& backend,
                                           StateCache& cache, const std::vector<Query>& queries) {
    std::unordered_map<int, const Query*> by_id;
    for (const auto& q : queries) by_id.emplace(q.id, &q);
    std::vector<PreferenceExample> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        auto it = by_id.find(p.query_id);
        if (it == by_id.end()) throw Error("unknown_query", "preference pair refers to unknown query " + std::to_string(p.query_id));
        out.push_back({cached_pool(cache, backend, *it->second, p.plus), cached_pool(cache, backend, *it->second, p.minus)});
    }
    return out;
}

}  // namespace icl
