#include <doctest.h>

#include <map>
#include <set>

#include "icl/baselines.hpp"

using namespace icl;

namespace {

Corpus text_corpus(const std::vector<std::string>& docs) {
    Corpus c;
    c.num_classes = 2;
    c.dim = 2;
    for (std::size_t i = 0; i < docs.size(); ++i)
        c.items.push_back(Demonstration{static_cast<int>(i), Vec::Unit(2, static_cast<Eigen::Index>(i % 2)), static_cast<int>(i % 2), docs[i]});
    return c;
}

// Okapi BM25 written out term by term.
double okapi(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& query, std::size_t d) {
    const double k1 = 1.2, b = 0.75, n = static_cast<double>(docs.size());
    double avg = 0;
    for (const auto& doc : docs) avg += static_cast<double>(doc.size());
    avg /= n;
    double score = 0;
    for (const auto& term : query) {
        double df = 0;
        for (const auto& doc : docs)
            if (std::find(doc.begin(), doc.end(), term) != doc.end()) df += 1;
        const double idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
        const double tf = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), term));
        const double len = static_cast<double>(docs[d].size());
        score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg));
    }
    return score;
}

}  // namespace

TEST_CASE("random retrieval draws distinct ids reproducibly") {
    Rng a(5), b(5);
    for (int i = 0; i < 50; ++i) {
        const auto x = random_retrieve(6, 6, a);
        CHECK(x == random_retrieve(6, 6, b));
        CHECK(std::set<int>(x.begin(), x.end()).size() == 6);
    }
    CHECK_THROWS_AS(random_retrieve(3, 4, a), Error);
}

TEST_CASE("random retrieval is uniform over ordered pairs") {
    Rng rng(123);
    std::map<std::pair<int, int>, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const auto x = random_retrieve(5, 2, rng);
        counts[{x[0], x[1]}]++;
    }
    CHECK(counts.size() == 20);
    const double p = 1.0 / 20, expected = draws * p, sigma = std::sqrt(draws * p * (1 - p));
    double chi2 = 0;
    for (const auto& [pair, n] : counts) {
        CHECK(std::abs(n - expected) < 3 * sigma);
        chi2 += (n - expected) * (n - expected) / expected;
    }
    // 19 degrees of freedom, 99.9th percentile is about 43.8
    CHECK(chi2 < 43.8);
}

TEST_CASE("tokenizer lowercases and splits on non-alphanumerics") {
    CHECK(tokenize("F0p2, f1N1!label2") == std::vector<std::string>{"f0p2", "f1n1", "label2"});
    CHECK(tokenize("  ").empty());
}

TEST_CASE("bm25 on the three-document example matches a hand computation") {
    const std::vector<std::string> docs{"a b", "a a", "c"};
    const Bm25Index index(text_corpus(docs));
    const std::vector<std::vector<std::string>> toks{{"a", "b"}, {"a", "a"}, {"c"}};
    const auto scores = index.scores("a a");
    for (std::size_t d = 0; d < 3; ++d) CHECK(scores[d] == doctest::Approx(okapi(toks, {"a", "a"}, d)).epsilon(1e-14));
    CHECK(index.idf("a") == doctest::Approx(std::log(1.6)).epsilon(1e-15));
    CHECK(scores[2] == 0.0);
    Rng rng(1);
    // best match last
    CHECK(bm25_retrieve(index, "a a", 2, rng) == IdTuple{0, 1});
}

TEST_CASE("bm25 ranking conventions") {
    Rng rng(1);
    const Bm25Index index(text_corpus({"x y", "y z", "q y", "x y"}));
    const auto one = bm25_retrieve(index, "q", 2, rng);
    CHECK(one.back() == 2);
    CHECK(bm25_retrieve(index, "x", 1, rng) == IdTuple{0});
    for (double s : index.scores("x y z q w")) CHECK(s >= 0.0);
}

TEST_CASE("bm25 scores do not depend on document order") {
    const std::vector<std::string> docs{"f0p1 f1n2 label0", "f0p1 f1z0 label1", "f0n1 f1n2 label0", "f0z0 label1"};
    const Bm25Index forward(text_corpus(docs));
    std::vector<std::string> reversed(docs.rbegin(), docs.rend());
    const Bm25Index backward(text_corpus(reversed));
    const auto a = forward.scores("f0p1 f1n2");
    const auto b = backward.scores("f0p1 f1n2");
    for (std::size_t i = 0; i < docs.size(); ++i) CHECK(a[i] == doctest::Approx(b[docs.size() - 1 - i]).epsilon(1e-15));
}

TEST_CASE("bm25 without term overlap falls back to random draws") {
    const Bm25Index index(text_corpus({"a", "b", "c"}));
    Rng a(4), b(4);
    CHECK(bm25_retrieve(index, "zzz", 2, a) == random_retrieve(3, 2, b));
}

TEST_CASE("oracle with k = 1 equals a linear scan") {
    const auto task = generate_task(TaskSpec{.dim = 4, .num_classes = 3, .corpus_size = 15, .n_train = 0, .n_test = 20, .noise = 0.4, .seed = 6});
    ToyLm lm(task.corpus);
    for (const auto& q : task.test) {
        int best = 0;
        double best_score = -1e300;
        for (int i = 0; i < 15; ++i) {
            const double s = lm.score(q, std::vector<int>{i})(q.gold_label);
            if (s > best_score) best_score = s, best = i;
        }
        const auto o = oracle(lm, q, 1);
        CHECK(o.ids == IdTuple{best});
        CHECK(o.score == best_score);
    }
}

TEST_CASE("oracle ties go to the lexicographically smallest tuple") {
    Corpus c;
    c.num_classes = 2;
    c.dim = 2;
    for (int i = 0; i < 5; ++i) c.items.push_back(Demonstration{i, Vec::Unit(2, 0), 0, ""});
    ToyLm lm(c);
    const Query q{100, Vec::Unit(2, 1), 1, ""};
    CHECK(oracle(lm, q, 3).ids == IdTuple{0, 1, 2});
}

TEST_CASE("oracle dominates greedy and every tree leaf") {
    const auto task = generate_task(TaskSpec{.dim = 4, .num_classes = 2, .corpus_size = 10, .n_train = 0, .n_test = 30, .noise = 0.3, .seed = 7});
    ToyLm lm(task.corpus);
    const auto head = init_head(lm);
    StateCache cache;
    Rng rng(2);
    const std::vector<int> widths{3, 2, 2};
    for (const auto& q : task.test) {
        const auto o = oracle(lm, q, 3);
        const double greedy = lm.score(q, greedy_decode(head, lm, q, 3))(q.gold_label);
        CHECK(o.score >= greedy);
        CHECK(o.score >= lm.score(q, random_retrieve(10, 3, rng))(q.gold_label));
        for (const auto& c : sample_candidate_tree(head, lm, cache, q, widths, rng).candidates) CHECK(o.score >= c.score);

        // the argmax tree always contains the greedy path, so greedy sits above its worst leaf
        double worst = 1e300;
        for (const auto& c : sample_candidate_tree(head, lm, cache, q, widths, rng, TreeSampling::argmax).candidates) {
            CHECK(o.score >= c.score);
            worst = std::min(worst, c.score);
        }
        CHECK(greedy >= worst);
    }
}

TEST_CASE("oracle refuses oversized searches") {
    const auto task = generate_task(TaskSpec{.dim = 4, .num_classes = 2, .corpus_size = 120, .n_train = 0, .n_test = 1, .noise = 0.3, .seed = 7});
    ToyLm lm(task.corpus);
    CHECK_THROWS_AS(oracle(lm, task.test[0], 3), Error);
    CHECK_NOTHROW(oracle(lm, task.test[0], 2));
}
