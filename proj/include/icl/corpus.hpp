#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icl/numerics.hpp"

namespace icl {

/// A labeled in-context example. Ids of a corpus are dense: 0..N-1.
struct Demonstration {
    int id = 0;
    Vec features;  // unit norm
    int label = 0;
    std::string text;

    friend bool operator==(const Demonstration& a, const Demonstration& b) {
        return a.id == b.id && a.label == b.label && a.text == b.text && same(a.features, b.features);
    }
};

/// A test or training input. Ids never collide with demonstration ids.
struct Query {
    int id = 0;
    Vec features;  // unit norm
    int gold_label = 0;
    std::string text;

    friend bool operator==(const Query& a, const Query& b) {
        return a.id == b.id && a.gold_label == b.gold_label && a.text == b.text && same(a.features, b.features);
    }
};

struct Corpus {
    std::vector<Demonstration> items;
    int num_classes = 0;
    int dim = 0;

    std::size_t size() const { return items.size(); }
    const Demonstration& operator[](std::size_t i) const { return items[i]; }
    bool operator==(const Corpus&) const = default;
};

/// Synthetic spherical-prototype classification task.
struct TaskSpec {
    int dim = 8;
    int num_classes = 3;
    int corpus_size = 50;
    int n_train = 200;
    int n_test = 100;
    double noise = 0.1;
    std::uint64_t seed = 1;
};

struct Task {
    Corpus corpus;
    std::vector<Query> train;
    std::vector<Query> test;
    Matrix prototypes;  // num_classes x dim
};

Task generate_task(const TaskSpec& spec);

/// Bag-of-token rendering of a feature vector (coordinate index + quantized value),
/// used as the text field so sparse retrievers have something to match on.
std::string render_features(const Vec& features);

void save_corpus(const std::string& path, const Corpus& corpus);
void save_queries(const std::string& path, const std::vector<Query>& queries);

/// Loads one JSON object per line. Feature vectors within 1e-3 of unit norm are renormalized,
/// anything further away is rejected. Errors name the offending line.
Corpus load_corpus(const std::string& path);
std::vector<Query> load_queries(const std::string& path);

/// FNV-1a over ids, labels and feature bits; identifies a corpus in checkpoints.
std::uint64_t fingerprint(const Corpus& corpus);

}  // namespace icl
