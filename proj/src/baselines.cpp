#include "icl/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <numeric>

namespace icl {

IdTuple random_retrieve(int corpus_size, int k, Rng& rng) {
    if (k < 0 || k > corpus_size)
        throw Error("k_exceeds_corpus", "k=" + std::to_string(k) + " exceeds corpus size " + std::to_string(corpus_size));
    std::vector<int> pool(corpus_size);
    std::iota(pool.begin(), pool.end(), 0);
    IdTuple out;
    for (int t = 0; t < k; ++t) {
        std::uniform_int_distribution<int> pick(t, corpus_size - 1);
        std::swap(pool[t], pool[pick(rng)]);
        out.push_back(pool[t]);
    }
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Bm25Index::Bm25Index(const Corpus& corpus, double k1, double b) : k1_(k1), b_(b) {
    term_freq_.resize(corpus.size());
    lengths_.resize(corpus.size());
    long total = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto tokens = tokenize(corpus[i].text);
        lengths_[i] = static_cast<int>(tokens.size());
        total += lengths_[i];
        for (const auto& t : tokens) ++term_freq_[i][t];
        for (const auto& [term, _] : term_freq_[i]) ++doc_freq_[term];
    }
    avg_length_ = corpus.size() ? static_cast<double>(total) / static_cast<double>(corpus.size()) : 0.0;
}

double Bm25Index::idf(const std::string& term) const {
    auto it = doc_freq_.find(term);
    const double df = it == doc_freq_.end() ? 0.0 : it->second;
    const double n = static_cast<double>(lengths_.size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<double> Bm25Index::scores(const std::string& query_text) const {
    std::vector<double> out(lengths_.size(), 0.0);
    const double avg = avg_length_ > 0 ? avg_length_ : 1.0;
    for (const auto& term : tokenize(query_text)) {
        if (!doc_freq_.contains(term)) continue;
        const double w = idf(term);
        for (std::size_t d = 0; d < lengths_.size(); ++d) {
            auto it = term_freq_[d].find(term);
            if (it == term_freq_[d].end()) continue;
            const double tf = it->second;
            const double norm = k1_ * (1.0 - b_ + b_ * lengths_[d] / avg);
            out[d] += w * tf * (k1_ + 1.0) / (tf + norm);
        }
    }
    return out;
}

IdTuple bm25_retrieve(const Bm25Index& index, const std::string& query_text, int k, Rng& fallback_rng) {
    const int n = index.size();
    if (k < 0 || k > n) throw Error("k_exceeds_corpus", "k=" + std::to_string(k) + " exceeds corpus size " + std::to_string(n));
    const auto s = index.scores(query_text);
    if (std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; })) {
        std::cerr << "warning: bm25: no vocabulary overlap with query, falling back to random retrieval\n";
        return random_retrieve(n, k, fallback_rng);
    }
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
        if (s[a] != s[b]) return s[a] > s[b];
        return a < b;
    });
    IdTuple top(idx.begin(), idx.begin() + k);
    std::reverse(top.begin(), top.end());
    return top;
}

OracleResult oracle(const Backend& backend, const Query& query, int k) {
    const int n = static_cast<int>(backend.corpus().size());
    if (k < 0 || k > n) throw Error("k_exceeds_corpus", "k exceeds corpus size");
    double tuples = 1;
    for (int t = 0; t < k; ++t) tuples *= n - t;
    if (tuples > kOracleLimit)
        throw Error("oracle_too_large", std::to_string(static_cast<long long>(tuples)) +
                                            " ordered tuples exceed the exhaustive-search limit; use a smaller corpus or k");
    if (query.gold_label < 0 || query.gold_label >= backend.num_classes())
        throw Error("invalid_label", "query gold label outside the backend's classes");

    OracleResult best;
    best.score = -std::numeric_limits<double>::infinity();
    IdTuple cur;
    std::vector<bool> used(n, false);
    // depth-first in lexicographic order; strict improvement keeps the smallest tuple on ties
    auto visit = [&](auto&& self) -> void {
        if (static_cast<int>(cur.size()) == k) {
            const double s = backend.score(query, cur)(query.gold_label);
            if (s > best.score || best.ids.empty()) {
                best.score = s;
                best.ids = cur;
            }
            return;
        }
        for (int i = 0; i < n; ++i) {
            if (used[i]) continue;
            used[i] = true;
            cur.push_back(i);
            self(self);
            cur.pop_back();
            used[i] = false;
        }
    };
    visit(visit);
    return best;
}

}  // namespace icl
