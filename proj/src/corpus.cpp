#include "icl/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace icl {
namespace {

using json = nlohmann::json;

Vec random_unit(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(dim);
    do {
        for (int i = 0; i < dim; ++i) v(i) = gauss(rng);
    } while (v.norm() < 1e-12);
    return v / v.norm();
}

// Balanced labels (counts differ by at most one), shuffled.
std::vector<int> balanced_labels(int count, int num_classes, std::mt19937_64& rng) {
    std::vector<int> labels(count);
    for (int i = 0; i < count; ++i) labels[i] = i % num_classes;
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
}

Vec noisy_member(const Matrix& prototypes, int label, double noise, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec f = prototypes.row(label).transpose();
    if (noise > 0)
        for (int i = 0; i < f.size(); ++i) f(i) += noise * gauss(rng);
    const double n = f.norm();
    if (n < 1e-12) return prototypes.row(label).transpose();
    return noise > 0 ? Vec(f / n) : f;
}

json item_json(int id, const Vec& features, int label, const std::string& text) {
    json j;
    j["id"] = id;
    j["features"] = std::vector<double>(features.data(), features.data() + features.size());
    j["label"] = label;
    if (!text.empty()) j["text"] = text;
    return j;
}

struct RawItem {
    int id;
    Vec features;
    int label;
    std::string text;
    std::size_t line;
};

[[noreturn]] void fail_at(const std::string& path, std::size_t line, const std::string& code, const std::string& what) {
    throw Error(code, path + ":" + std::to_string(line) + ": " + what);
}

std::vector<RawItem> read_items(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::vector<RawItem> out;
    std::set<int> seen;
    std::string text;
    std::size_t line_no = 0;
    int dim = -1;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            fail_at(path, line_no, "malformed_json", e.what());
        }
        if (!j.is_object()) fail_at(path, line_no, "malformed_json", "expected a JSON object");
        if (!j.contains("id") || !j["id"].is_number_integer()) fail_at(path, line_no, "schema", "missing integer \"id\"");
        if (!j.contains("label") || !j["label"].is_number_integer())
            fail_at(path, line_no, "schema", "missing integer \"label\"");
        if (!j.contains("features") || !j["features"].is_array() || j["features"].empty())
            fail_at(path, line_no, "schema", "missing non-empty \"features\" array");

        RawItem item;
        item.line = line_no;
        item.id = j["id"].get<int>();
        item.label = j["label"].get<int>();
        if (item.label < 0) fail_at(path, line_no, "schema", "negative label");
        const auto& fj = j["features"];
        item.features.resize(static_cast<Eigen::Index>(fj.size()));
        for (std::size_t i = 0; i < fj.size(); ++i) {
            if (!fj[i].is_number()) fail_at(path, line_no, "schema", "non-numeric feature");
            item.features(static_cast<Eigen::Index>(i)) = fj[i].get<double>();
        }
        if (!all_finite(item.features)) fail_at(path, line_no, "schema", "non-finite feature");
        if (dim < 0) dim = static_cast<int>(item.features.size());
        if (item.features.size() != dim) fail_at(path, line_no, "schema", "feature dimension differs from earlier lines");

        const double norm = item.features.norm();
        if (std::abs(norm - 1.0) > 1e-3)
            fail_at(path, line_no, "non_unit_features", "feature norm " + std::to_string(norm) + " is not within 1e-3 of 1");
        if (std::abs(norm - 1.0) > 1e-9) item.features /= norm;

        if (j.contains("text")) {
            if (!j["text"].is_string()) fail_at(path, line_no, "schema", "\"text\" must be a string");
            item.text = j["text"].get<std::string>();
        }
        if (!seen.insert(item.id).second)
            fail_at(path, line_no, "duplicate_id", "duplicate id " + std::to_string(item.id));
        out.push_back(std::move(item));
    }
    return out;
}

void write_lines(const std::string& path, const std::vector<json>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path);
    for (const auto& r : rows) out << r.dump() << '\n';
}

}  // namespace

std::string render_features(const Vec& features) {
    std::ostringstream os;
    for (Eigen::Index i = 0; i < features.size(); ++i) {
        const long q = std::lround(features(i) * 3.0);
        if (i) os << ' ';
        os << 'f' << i << (q > 0 ? "p" : q < 0 ? "n" : "z") << std::labs(q);
    }
    return os.str();
}

Task generate_task(const TaskSpec& spec) {
    if (spec.noise < 0) throw Error("invalid_spec", "prototype noise must be >= 0");
    if (spec.num_classes < 2) throw Error("invalid_spec", "need at least 2 classes");
    if (spec.num_classes > spec.corpus_size) throw Error("invalid_spec", "more classes than corpus items");
    if (spec.dim < 1) throw Error("invalid_spec", "feature dimension must be positive");
    if (spec.n_train < 0 || spec.n_test < 0) throw Error("invalid_spec", "query counts must be >= 0");

    std::mt19937_64 rng(spec.seed);
    Task task;
    task.prototypes.resize(spec.num_classes, spec.dim);
    for (int c = 0; c < spec.num_classes; ++c) task.prototypes.row(c) = random_unit(spec.dim, rng).transpose();

    task.corpus.num_classes = spec.num_classes;
    task.corpus.dim = spec.dim;
    const auto demo_labels = balanced_labels(spec.corpus_size, spec.num_classes, rng);
    for (int i = 0; i < spec.corpus_size; ++i) {
        Demonstration d;
        d.id = i;
        d.label = demo_labels[i];
        d.features = noisy_member(task.prototypes, d.label, spec.noise, rng);
        d.text = render_features(d.features) + " label" + std::to_string(d.label);
        task.corpus.items.push_back(std::move(d));
    }

    int next_id = spec.corpus_size;
    auto make_queries = [&](int count) {
        std::vector<Query> qs;
        const auto labels = balanced_labels(count, spec.num_classes, rng);
        for (int i = 0; i < count; ++i) {
            Query q;
            q.id = next_id++;
            q.gold_label = labels[i];
            q.features = noisy_member(task.prototypes, q.gold_label, spec.noise, rng);
            q.text = render_features(q.features);
            qs.push_back(std::move(q));
        }
        return qs;
    };
    task.train = make_queries(spec.n_train);
    task.test = make_queries(spec.n_test);
    return task;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
    std::vector<json> rows;
    for (const auto& d : corpus.items) rows.push_back(item_json(d.id, d.features, d.label, d.text));
    write_lines(path, rows);
}

void save_queries(const std::string& path, const std::vector<Query>& queries) {
    std::vector<json> rows;
    for (const auto& q : queries) rows.push_back(item_json(q.id, q.features, q.gold_label, q.text));
    write_lines(path, rows);
}

Corpus load_corpus(const std::string& path) {
    auto raw = read_items(path);
    if (raw.empty()) throw Error("empty_corpus", path + ": corpus is empty");
    const int n = static_cast<int>(raw.size());
    Corpus corpus;
    corpus.items.resize(raw.size());
    std::vector<bool> filled(raw.size(), false);
    int max_label = 0;
    for (auto& r : raw) {
        if (r.id < 0 || r.id >= n)
            fail_at(path, r.line, "sparse_ids", "demonstration id " + std::to_string(r.id) + " outside 0.." + std::to_string(n - 1));
        filled[r.id] = true;
        max_label = std::max(max_label, r.label);
        corpus.items[r.id] = Demonstration{r.id, std::move(r.features), r.label, std::move(r.text)};
    }
    corpus.dim = static_cast<int>(corpus.items.front().features.size());
    corpus.num_classes = std::max(2, max_label + 1);
    return corpus;
}

std::vector<Query> load_queries(const std::string& path) {
    auto raw = read_items(path);
    std::vector<Query> out;
    out.reserve(raw.size());
    for (auto& r : raw) out.push_back(Query{r.id, std::move(r.features), r.label, std::move(r.text)});
    return out;
}

std::uint64_t fingerprint(const Corpus& corpus) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 1099511628211ULL;
        }
    };
    mix(static_cast<std::uint64_t>(corpus.num_classes));
    for (const auto& d : corpus.items) {
        mix(static_cast<std::uint64_t>(d.id));
        mix(static_cast<std::uint64_t>(d.label));
        for (Eigen::Index i = 0; i < d.features.size(); ++i) mix(std::bit_cast<std::uint64_t>(d.features(i)));
    }
    return h;
}

}  // namespace icl
