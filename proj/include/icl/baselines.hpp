#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "icl/retrieval.hpp"

namespace icl {

/// k distinct ids drawn uniformly without replacement, in draw order.
IdTuple random_retrieve(int corpus_size, int k, Rng& rng);

/// Lowercase, split on anything that is not [a-z0-9].
std::vector<std::string> tokenize(const std::string& text);

/// Okapi BM25 over the demonstrations' text field.
class Bm25Index {
public:
    explicit Bm25Index(const Corpus& corpus, double k1 = 1.2, double b = 0.75);

    /// One score per demonstration, all >= 0. Repeated query terms contribute repeatedly.
    std::vector<double> scores(const std::string& query_text) const;

    /// ln(1 + (N - df + 0.5) / (df + 0.5)), never negative.
    double idf(const std::string& term) const;

    int size() const { return static_cast<int>(lengths_.size()); }
    double k1() const { return k1_; }
    double b() const { return b_; }

private:
    double k1_;
    double b_;
    double avg_length_ = 0;
    std::unordered_map<std::string, int> doc_freq_;
    std::vector<std::unordered_map<std::string, int>> term_freq_;
    std::vector<int> lengths_;
};

/// Top-k by BM25 (ties to the lower id), emitted in ascending score order so the best match sits
/// last, right before the query. With no term overlap at all it falls back to random_retrieve
/// and prints a warning.
IdTuple bm25_retrieve(const Bm25Index& index, const std::string& query_text, int k, Rng& fallback_rng);

struct OracleResult {
    IdTuple ids;
    double score = 0;  // log P(gold | z, x)
};

inline constexpr double kOracleLimit = 1e6;

/// Exhaustive search over ordered k-tuples without repetition; ties go to the lexicographically
/// smallest tuple. Refuses when the number of tuples exceeds kOracleLimit.
OracleResult oracle(const Backend& backend, const Query& query, int k);

}  // namespace icl
