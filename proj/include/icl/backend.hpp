#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "icl/corpus.hpp"

namespace icl {

using IdTuple = std::vector<int>;

/// Frozen scoring model: embeddings, pooled context states and label log-probabilities.
class Backend {
public:
    virtual ~Backend() = default;

    virtual int dim() const = 0;
    virtual int num_classes() const = 0;
    virtual const Corpus& corpus() const = 0;

    virtual Vec embed_demo(int id) const = 0;
    virtual Vec embed_query(const Query& q) const = 0;

    /// State after reading the query and the given demonstrations (in order).
    virtual Vec pool(const Query& q, std::span<const int> ids) const = 0;

    /// Per-class log P(y | z, x); log-sum-exp is 0.
    virtual Vec score(const Query& q, std::span<const int> ids) const = 0;
};

struct ToyLmParams {
    double decay = 0.5;        // recency decay gamma in (0,1)
    double temperature = 4.0;  // logit scale alpha > 0
};

/// Recency-weighted similarity voting. Class logit c is
///   alpha * sum_j decay^(t-j) * cos(x, demo_j) * [label(demo_j) == c]
/// so the last demonstration weighs most. Embeddings are [features ; one-hot(label)],
/// queries carry a zero label block. Pooling is the mean of all embeddings read so far.
class ToyLm final : public Backend {
public:
    ToyLm(const Corpus& corpus, ToyLmParams params = {});

    int dim() const override { return corpus_->dim + corpus_->num_classes; }
    int num_classes() const override { return corpus_->num_classes; }
    const Corpus& corpus() const override { return *corpus_; }
    const ToyLmParams& params() const { return params_; }

    Vec embed_demo(int id) const override;
    Vec embed_query(const Query& q) const override;
    Vec pool(const Query& q, std::span<const int> ids) const override;
    Vec score(const Query& q, std::span<const int> ids) const override;

private:
    void check_ids(std::span<const int> ids) const;

    const Corpus* corpus_;
    ToyLmParams params_;
};

/// Memo of pooled states and scores keyed by (query id, ordered demonstration ids).
/// Readers may run concurrently; inserts take an exclusive lock.
class StateCache {
public:
    struct Key {
        int query_id = 0;
        IdTuple ids;
        bool operator==(const Key&) const = default;
    };

    /// Non-owning key for allocation-free lookups.
    struct KeyView {
        int query_id = 0;
        std::span<const int> ids;
    };

    struct KeyHash {
        using is_transparent = void;
        std::size_t operator()(const Key& k) const noexcept { return (*this)(KeyView{k.query_id, k.ids}); }
        std::size_t operator()(const KeyView& k) const noexcept;
    };

    struct KeyEq {
        using is_transparent = void;
        static bool eq(const KeyView& a, const KeyView& b) {
            return a.query_id == b.query_id && std::ranges::equal(a.ids, b.ids);
        }
        bool operator()(const Key& a, const Key& b) const { return a == b; }
        bool operator()(const KeyView& a, const Key& b) const { return eq(a, {b.query_id, b.ids}); }
        bool operator()(const Key& a, const KeyView& b) const { return eq({a.query_id, a.ids}, b); }
    };

    struct Entry {
        std::optional<Vec> pooled;
        std::optional<Vec> scores;
    };

    /// Peek without touching the counters.
    std::optional<Vec> find_pool(const KeyView& key) const;
    std::optional<Vec> find_score(const KeyView& key) const;
    std::optional<Vec> find_pool(const Key& key) const { return find_pool(KeyView{key.query_id, key.ids}); }
    std::optional<Vec> find_score(const Key& key) const { return find_score(KeyView{key.query_id, key.ids}); }
    /// Peek that counts a hit or a miss.
    std::optional<Vec> lookup_pool(const KeyView& key);
    std::optional<Vec> lookup_score(const KeyView& key);

    void store_pool(const Key& key, const Vec& value);
    void store_score(const Key& key, const Vec& value);

    std::size_t hits() const { return hits_.load(); }
    std::size_t misses() const { return misses_.load(); }
    std::size_t size() const;
    void reset_counters();

    /// JSON snapshot; doubles are written in shortest round-trip form so reload is exact.
    void save(const std::string& path) const;
    static StateCache load(const std::string& path);

    StateCache() = default;
    StateCache(StateCache&& other) noexcept;
    StateCache& operator=(StateCache&& other) noexcept;

private:
    std::optional<Vec> lookup(const KeyView& key, std::optional<Vec> Entry::*slot, bool count) const;

    mutable std::shared_mutex mutex_;
    std::unordered_map<Key, Entry, KeyHash, KeyEq> map_;
    mutable std::atomic<std::size_t> hits_{0};
    mutable std::atomic<std::size_t> misses_{0};
};

Vec cached_score(StateCache& cache, const Backend& backend, const Query& q, std::span<const int> ids);
Vec cached_pool(StateCache& cache, const Backend& backend, const Query& q, std::span<const int> ids);

}  // namespace icl
