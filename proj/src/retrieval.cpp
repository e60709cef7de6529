#include "icl/retrieval.hpp"

#include <algorithm>
#include <numeric>

namespace icl {

RetrievalHead::RetrievalHead(Matrix weights, Matrix reference)
    : weights_(std::move(weights)), reference_(std::move(reference)) {
    if (weights_.rows() != reference_.rows() || weights_.cols() != reference_.cols())
        throw Error("shape_mismatch", "retrieval head and reference differ in shape");
}

bool operator==(const RetrievalHead& a, const RetrievalHead& b) {
    return same(a.weights_, b.weights_) && same(a.reference_, b.reference_);
}

RetrievalHead init_head(const Backend& backend) {
    const int n = static_cast<int>(backend.corpus().size());
    if (n == 0) throw Error("empty_corpus", "cannot initialize a retrieval head over an empty corpus");
    Matrix m(n, backend.dim());
    for (int i = 0; i < n; ++i) m.row(i) = backend.embed_demo(i).transpose();
    return RetrievalHead(std::move(m));
}

Mask exclusion_mask(int n, std::span<const int> excluded) {
    Mask mask = Mask::Constant(n, true);
    for (int id : excluded) {
        if (id < 0 || id >= n) throw Error("invalid_id", "masked id out of range");
        mask(id) = false;
    }
    return mask;
}

Vec policy_logits(const Matrix& weights, const Vec& state) {
    if (state.size() != weights.cols())
        throw Error("shape_mismatch", "state length " + std::to_string(state.size()) + " differs from head width " +
                                          std::to_string(weights.cols()));
    return weights * state;
}

Vec policy_step(const RetrievalHead& head, const Vec& state, std::span<const int> selected) {
    const Mask mask = exclusion_mask(head.size(), selected);
    return softmax(policy_logits(head.weights(), state), &mask);
}

IdTuple Episode::actions() const {
    IdTuple ids;
    ids.reserve(steps.size());
    for (const auto& s : steps) ids.push_back(s.action);
    return ids;
}

int sample_categorical(const Vec& probs, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng) * probs.sum();
    double acc = 0;
    int last = -1;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (probs(i) <= 0) continue;
        acc += probs(i);
        last = static_cast<int>(i);
        if (u < acc) return last;
    }
    if (last < 0) throw Error("empty_action_space", "empty action space");
    return last;
}

namespace {

Vec state_for(const Backend& backend, const Query& query, std::span<const int> prefix, StateCache* cache) {
    return cache ? cached_pool(*cache, backend, query, prefix) : backend.pool(query, prefix);
}

void check_k(int k, int n) {
    if (k < 0) throw Error("invalid_argument", "k must be non-negative");
    if (k > n) throw Error("k_exceeds_corpus", "k=" + std::to_string(k) + " exceeds corpus size " + std::to_string(n));
}

int argmax_allowed(const Vec& logits, const Mask& mask) {
    int best = -1;
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        if (mask(i) && (best < 0 || logits(i) > logits(best))) best = static_cast<int>(i);
    if (best < 0) throw Error("empty_action_space", "empty action space");
    return best;
}

}  // namespace

Episode rollout(const RetrievalHead& head, const Backend& backend, const Query& query, int k, Rng& rng,
                StateCache* cache) {
    check_k(k, head.size());
    Episode ep;
    ep.query_id = query.id;
    IdTuple chosen;
    for (int t = 0; t < k; ++t) {
        Step step;
        step.state = state_for(backend, query, chosen, cache);
        step.mask = exclusion_mask(head.size(), chosen);
        const Vec logp = log_softmax(policy_logits(head.weights(), step.state), &step.mask);
        const Vec logp_ref = log_softmax(policy_logits(head.reference(), step.state), &step.mask);
        step.action = sample_categorical(logp.array().exp().matrix(), rng);
        step.logp = logp(step.action);
        step.logp_ref = logp_ref(step.action);
        chosen.push_back(step.action);
        ep.steps.push_back(std::move(step));
    }
    return ep;
}

IdTuple greedy_decode(const Matrix& weights, const Backend& backend, const Query& query, int k, StateCache* cache) {
    const int n = static_cast<int>(weights.rows());
    check_k(k, n);
    IdTuple chosen;
    for (int t = 0; t < k; ++t) {
        const Vec state = state_for(backend, query, chosen, cache);
        chosen.push_back(argmax_allowed(policy_logits(weights, state), exclusion_mask(n, chosen)));
    }
    return chosen;
}

std::vector<int> CandidateSet::order() const {
    std::vector<int> out(candidates.size());
    for (std::size_t j = 0; j < ranks.size(); ++j) out[ranks[j]] = static_cast<int>(j);
    return out;
}

long candidate_count(std::span<const int> widths) {
    long m = 1;
    for (int w : widths) m *= w;
    return m;
}

CandidateSet sample_candidate_tree(const RetrievalHead& head, const Backend& backend, StateCache& cache,
                                   const Query& query, std::span<const int> widths, Rng& rng, TreeSampling mode) {
    const int n = head.size();
    if (widths.empty()) throw Error("invalid_argument", "candidate tree needs at least one level");
    for (int w : widths)
        if (w < 1) throw Error("invalid_argument", "candidate tree widths must be >= 1");
    check_k(static_cast<int>(widths.size()), n);
    if (query.gold_label < 0 || query.gold_label >= backend.num_classes())
        throw Error("invalid_label", "query gold label outside the backend's classes");

    std::vector<IdTuple> frontier{IdTuple{}};
    for (std::size_t t = 0; t < widths.size(); ++t) {
        std::vector<IdTuple> next;
        next.reserve(frontier.size() * static_cast<std::size_t>(widths[t]));
        for (const auto& prefix : frontier) {
            const Vec state = cached_pool(cache, backend, query, prefix);
            const Vec logits = policy_logits(head.weights(), state);
            Mask mask = exclusion_mask(n, prefix);
            for (int c = 0; c < widths[t]; ++c) {
                int pick;
                if (mode == TreeSampling::argmax) {
                    pick = mask.any() ? argmax_allowed(logits, mask) : -1;
                } else {
                    const Vec probs = mask.any() ? softmax(logits, &mask) : Vec::Zero(n);
                    pick = (probs.array() > 0).any() ? sample_categorical(probs, rng) : -1;
                }
                if (pick < 0)
                    throw Error("insufficient_actions", "policy cannot supply " + std::to_string(widths[t]) +
                                                            " distinct actions at step " + std::to_string(t));
                mask(pick) = false;
                IdTuple child = prefix;
                child.push_back(pick);
                next.push_back(std::move(child));
            }
        }
        frontier = std::move(next);
    }

    CandidateSet cs;
    cs.query_id = query.id;
    for (auto& ids : frontier) {
        const double s = cached_score(cache, backend, query, ids)(query.gold_label);
        cs.candidates.push_back(Candidate{std::move(ids), s});
    }
    std::vector<int> idx(cs.candidates.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        const auto& ca = cs.candidates[a];
        const auto& cb = cs.candidates[b];
        if (ca.score != cb.score) return ca.score > cb.score;
        return ca.ids < cb.ids;
    });
    cs.ranks.assign(idx.size(), 0);
    for (std::size_t r = 0; r < idx.size(); ++r) cs.ranks[idx[r]] = static_cast<int>(r);
    return cs;
}

}  // namespace icl
