#pragma once

#include <random>
#include <span>
#include <vector>

#include "icl/backend.hpp"

namespace icl {

using Rng = std::mt19937_64;

/// Trainable N x D retrieval head plus the frozen copy taken at initialization.
/// Row i scores demonstration i against the current pooled state.
class RetrievalHead {
public:
    RetrievalHead() = default;
    explicit RetrievalHead(Matrix initial) : weights_(initial), reference_(std::move(initial)) {}
    RetrievalHead(Matrix weights, Matrix reference);

    Matrix& weights() { return weights_; }
    const Matrix& weights() const { return weights_; }
    const Matrix& reference() const { return reference_; }

    int size() const { return static_cast<int>(weights_.rows()); }
    int dim() const { return static_cast<int>(weights_.cols()); }

    friend bool operator==(const RetrievalHead& a, const RetrievalHead& b);

private:
    Matrix weights_;
    Matrix reference_;
};

/// Row i = backend.embed_demo(i); the reference is a deep copy.
RetrievalHead init_head(const Backend& backend);

/// Allowed-action mask with the given ids removed.
Mask exclusion_mask(int n, std::span<const int> excluded);

/// Logits of the policy: weights * state.
Vec policy_logits(const Matrix& weights, const Vec& state);

/// softmax(weights * state) over demonstrations not yet selected.
Vec policy_step(const RetrievalHead& head, const Vec& state, std::span<const int> selected);

struct Step {
    Vec state;
    Mask mask;
    int action = 0;
    double logp = 0;      // under the trainable head at collection time
    double logp_ref = 0;  // under the frozen reference head
};

struct Episode {
    int query_id = 0;
    std::vector<Step> steps;

    IdTuple actions() const;
};

/// Draw from a probability vector. Zero-probability entries are never returned.
int sample_categorical(const Vec& probs, Rng& rng);

/// Auto-regressive sampling of k distinct demonstrations. Pass a cache to reuse pooled states.
Episode rollout(const RetrievalHead& head, const Backend& backend, const Query& query, int k, Rng& rng,
                StateCache* cache = nullptr);

/// Argmax at every step, ties to the lowest id.
IdTuple greedy_decode(const Matrix& weights, const Backend& backend, const Query& query, int k,
                      StateCache* cache = nullptr);
inline IdTuple greedy_decode(const RetrievalHead& head, const Backend& backend, const Query& query, int k,
                             StateCache* cache = nullptr) {
    return greedy_decode(head.weights(), backend, query, k, cache);
}

struct Candidate {
    IdTuple ids;
    double score = 0;  // log P(gold | z, x)
};

struct CandidateSet {
    int query_id = 0;
    std::vector<Candidate> candidates;  // tree (generation) order
    std::vector<int> ranks;             // ranks[j] = position of candidate j in descending score order

    /// Candidate indices from best to worst.
    std::vector<int> order() const;
};

enum class TreeSampling { categorical, argmax };

/// Breadth-wise candidate tree: widths[t] distinct children per node at depth t, leaves scored through
/// the cache and ranked by log P(gold), ties by lexicographic tuple order.
CandidateSet sample_candidate_tree(const RetrievalHead& head, const Backend& backend, StateCache& cache,
                                   const Query& query, std::span<const int> widths, Rng& rng,
                                   TreeSampling mode = TreeSampling::categorical);

/// Product of the per-step widths.
long candidate_count(std::span<const int> widths);

}  // namespace icl
