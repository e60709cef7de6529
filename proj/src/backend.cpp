#include "icl/backend.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace icl {

ToyLm::ToyLm(const Corpus& corpus, ToyLmParams params) : corpus_(&corpus), params_(params) {
    if (!(params_.decay > 0 && params_.decay < 1)) throw Error("invalid_argument", "toy decay must lie in (0,1)");
    if (!(params_.temperature > 0)) throw Error("invalid_argument", "toy temperature must be positive");
    if (corpus.items.empty()) throw Error("empty_corpus", "toy backend needs a non-empty corpus");
}

void ToyLm::check_ids(std::span<const int> ids) const {
    const int n = static_cast<int>(corpus_->size());
    for (std::size_t a = 0; a < ids.size(); ++a) {
        if (ids[a] < 0 || ids[a] >= n) throw Error("invalid_id", "demonstration id " + std::to_string(ids[a]) + " out of range");
        for (std::size_t b = 0; b < a; ++b)
            if (ids[a] == ids[b]) throw Error("repeated_id", "demonstration id " + std::to_string(ids[a]) + " repeated");
    }
}

Vec ToyLm::embed_demo(int id) const {
    if (id < 0 || id >= static_cast<int>(corpus_->size())) throw Error("invalid_id", "demonstration id out of range");
    const auto& d = (*corpus_)[id];
    Vec e = Vec::Zero(dim());
    e.head(corpus_->dim) = d.features;
    e(corpus_->dim + d.label) = 1.0;
    return e;
}

Vec ToyLm::embed_query(const Query& q) const {
    if (q.features.size() != corpus_->dim) throw Error("shape_mismatch", "query feature dimension differs from corpus");
    Vec e = Vec::Zero(dim());
    e.head(corpus_->dim) = q.features;
    return e;
}

Vec ToyLm::pool(const Query& q, std::span<const int> ids) const {
    check_ids(ids);
    Vec h = embed_query(q);
    for (int id : ids) {
        const auto& d = (*corpus_)[id];
        h.head(corpus_->dim) += d.features;
        h(corpus_->dim + d.label) += 1.0;
    }
    return h / static_cast<double>(ids.size() + 1);
}

Vec ToyLm::score(const Query& q, std::span<const int> ids) const {
    check_ids(ids);
    if (q.features.size() != corpus_->dim) throw Error("shape_mismatch", "query feature dimension differs from corpus");
    Vec logits = Vec::Zero(corpus_->num_classes);
    const double qn = q.features.norm();
    const std::size_t t = ids.size();
    double weight = 1.0;
    // walk backwards so the last demonstration gets weight decay^0
    for (std::size_t j = t; j-- > 0;) {
        const auto& d = (*corpus_)[ids[j]];
        const double cosine = q.features.dot(d.features) / (qn * d.features.norm());
        logits(d.label) += params_.temperature * weight * cosine;
        weight *= params_.decay;
    }
    return log_softmax(logits);
}

std::size_t StateCache::KeyHash::operator()(const KeyView& k) const noexcept {
    std::size_t h = std::hash<int>{}(k.query_id);
    for (int id : k.ids) h ^= std::hash<int>{}(id) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

StateCache::StateCache(StateCache&& other) noexcept {
    std::unique_lock lock(other.mutex_);
    map_ = std::move(other.map_);
    hits_ = other.hits_.load();
    misses_ = other.misses_.load();
}

StateCache& StateCache::operator=(StateCache&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        map_ = std::move(other.map_);
        hits_ = other.hits_.load();
        misses_ = other.misses_.load();
    }
    return *this;
}

std::optional<Vec> StateCache::lookup(const KeyView& key, std::optional<Vec> Entry::*slot, bool count) const {
    std::shared_lock lock(mutex_);
    const auto it = map_.find(key);
    const bool hit = it != map_.end() && (it->second.*slot).has_value();
    if (count) (hit ? hits_ : misses_).fetch_add(1, std::memory_order_relaxed);
    if (!hit) return std::nullopt;
    return it->second.*slot;
}

std::optional<Vec> StateCache::find_pool(const KeyView& key) const {
    return lookup(key, &Entry::pooled, false);
}
std::optional<Vec> StateCache::find_score(const KeyView& key) const {
    return lookup(key, &Entry::scores, false);
}
std::optional<Vec> StateCache::lookup_pool(const KeyView& key) { return lookup(key, &Entry::pooled, true); }
std::optional<Vec> StateCache::lookup_score(const KeyView& key) { return lookup(key, &Entry::scores, true); }

void StateCache::store_pool(const Key& key, const Vec& value) {
    std::unique_lock lock(mutex_);
    map_[key].pooled = value;
}

void StateCache::store_score(const Key& key, const Vec& value) {
    std::unique_lock lock(mutex_);
    map_[key].scores = value;
}

std::size_t StateCache::size() const {
    std::shared_lock lock(mutex_);
    return map_.size();
}

void StateCache::reset_counters() {
    hits_ = 0;
    misses_ = 0;
}

namespace {

using json = nlohmann::json;
constexpr const char* kCacheVersion = "icl-state-cache/1";

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void StateCache::save(const std::string& path) const {
    std::shared_lock lock(mutex_);
    // sorted for a stable file layout
    std::vector<const std::pair<const Key, Entry>*> rows;
    for (const auto& kv : map_) rows.push_back(&kv);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) {
        return std::tie(a->first.query_id, a->first.ids) < std::tie(b->first.query_id, b->first.ids);
    });
    json entries = json::array();
    for (const auto* kv : rows) {
        json e;
        e["query"] = kv->first.query_id;
        e["ids"] = kv->first.ids;
        if (kv->second.pooled) e["pooled"] = vec_json(*kv->second.pooled);
        if (kv->second.scores) e["scores"] = vec_json(*kv->second.scores);
        entries.push_back(std::move(e));
    }
    json root{{"version", kCacheVersion}, {"entries", std::move(entries)}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path);
    out << root.dump() << '\n';
}

StateCache StateCache::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("malformed_json", path + ": " + e.what());
    }
    if (root.value("version", "") != kCacheVersion)
        throw Error("version_mismatch", path + ": expected cache version " + std::string(kCacheVersion));
    StateCache cache;
    for (const auto& e : root.at("entries")) {
        Key key{e.at("query").get<int>(), e.at("ids").get<IdTuple>()};
        Entry entry;
        if (e.contains("pooled")) entry.pooled = json_vec(e["pooled"]);
        if (e.contains("scores")) entry.scores = json_vec(e["scores"]);
        cache.map_.emplace(std::move(key), std::move(entry));
    }
    return cache;
}

Vec cached_score(StateCache& cache, const Backend& backend, const Query& q, std::span<const int> ids) {
    if (auto hit = cache.lookup_score(StateCache::KeyView{q.id, ids})) return std::move(*hit);
    Vec value = backend.score(q, ids);
    cache.store_score(StateCache::Key{q.id, IdTuple(ids.begin(), ids.end())}, value);
    return value;
}

Vec cached_pool(StateCache& cache, const Backend& backend, const Query& q, std::span<const int> ids) {
    if (auto hit = cache.lookup_pool(StateCache::KeyView{q.id, ids})) return std::move(*hit);
    Vec value = backend.pool(q, ids);
    cache.store_pool(StateCache::Key{q.id, IdTuple(ids.begin(), ids.end())}, value);
    return value;
}

}  // namespace icl
