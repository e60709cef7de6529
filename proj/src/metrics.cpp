#include "icl/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "icl/format.hpp"

namespace icl {
namespace {

Vec scores_for(const Backend& backend, const Query& q, std::span<const int> ids, StateCache* cache) {
    return cache ? cached_score(*cache, backend, q, ids) : backend.score(q, ids);
}

void check_sizes(const std::vector<IdTuple>& selections, const std::vector<Query>& queries) {
    if (selections.size() != queries.size()) throw Error("shape_mismatch", "one selection per query required");
}

int argmax_first(const Vec& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = static_cast<int>(i);
    return best;
}

}  // namespace

int predict_label(const Backend& backend, const Query& q, std::span<const int> ids, StateCache* cache) {
    return argmax_first(scores_for(backend, q, ids, cache));
}

double accuracy(const Backend& backend, const std::vector<IdTuple>& selections, const std::vector<Query>& queries,
                StateCache* cache) {
    check_sizes(selections, queries);
    if (queries.empty()) return 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < queries.size(); ++i)
        correct += predict_label(backend, queries[i], selections[i], cache) == queries[i].gold_label ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(queries.size());
}

double mean_gold_probability(const Backend& backend, const std::vector<IdTuple>& selections,
                             const std::vector<Query>& queries, StateCache* cache) {
    check_sizes(selections, queries);
    if (queries.empty()) return 0;
    double total = 0;
    for (std::size_t i = 0; i < queries.size(); ++i)
        total += std::exp(scores_for(backend, queries[i], selections[i], cache)(queries[i].gold_label));
    return total / static_cast<double>(queries.size());
}

double representativeness(const std::vector<IdTuple>& selections, int corpus_size) {
    if (corpus_size <= 0) throw Error("invalid_argument", "corpus size must be positive");
    std::set<int> used;
    for (const auto& s : selections) used.insert(s.begin(), s.end());
    return static_cast<double>(used.size()) / static_cast<double>(corpus_size);
}

double diversity(const std::vector<IdTuple>& selections, const Corpus& corpus) {
    if (selections.empty()) return 0;
    double total = 0;
    for (const auto& s : selections) {
        std::set<int> labels;
        for (int id : s) labels.insert(corpus[static_cast<std::size_t>(id)].label);
        total += static_cast<double>(labels.size());
    }
    return total / static_cast<double>(selections.size());
}

EvalReport evaluate(const Method& method, const Backend& backend, const std::vector<Query>& queries,
                    StateCache* cache) {
    EvalReport report;
    report.method = method.name;
    std::vector<IdTuple> selections;
    std::size_t correct = 0;
    for (const auto& q : queries) {
        IdTuple ids = method.select(q);
        const Vec s = scores_for(backend, q, ids, cache);
        QueryRecord rec{q.id, ids, argmax_first(s), q.gold_label, s(q.gold_label)};
        correct += rec.predicted == rec.gold ? 1 : 0;
        report.records.push_back(std::move(rec));
        selections.push_back(std::move(ids));
    }
    report.accuracy = queries.empty() ? 0 : static_cast<double>(correct) / static_cast<double>(queries.size());
    report.representativeness = representativeness(selections, static_cast<int>(backend.corpus().size()));
    report.diversity = diversity(selections, backend.corpus());
    return report;
}

std::vector<EvalReport> compare(const std::vector<Method>& methods, const Backend& backend,
                                const std::vector<Query>& queries, StateCache* cache) {
    std::vector<EvalReport> out;
    for (const auto& m : methods) out.push_back(evaluate(m, backend, queries, cache));
    return out;
}

std::string report_csv(const std::vector<EvalReport>& reports, const std::string& config_hash) {
    std::ostringstream os;
    os << "# config_hash=" << config_hash << '\n';
    os << "method,accuracy,representativeness,diversity\n";
    for (const auto& r : reports)
        os << r.method << ',' << fmt_num(r.accuracy) << ',' << fmt_num(r.representativeness) << ','
           << fmt_num(r.diversity) << '\n';
    return os.str();
}

std::string detail_csv(const std::vector<EvalReport>& reports, const std::string& config_hash) {
    std::ostringstream os;
    os << "# config_hash=" << config_hash << '\n';
    os << "method,query_id,ids,predicted,gold,gold_logprob\n";
    for (const auto& r : reports) {
        for (const auto& rec : r.records) {
            os << r.method << ',' << rec.query_id << ',';
            for (std::size_t i = 0; i < rec.ids.size(); ++i) os << (i ? " " : "") << rec.ids[i];
            os << ',' << rec.predicted << ',' << rec.gold << ',' << fmt_num(rec.gold_logprob) << '\n';
        }
    }
    return os.str();
}

std::string report_table(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "method" << std::right << std::setw(10) << "accuracy" << std::setw(12)
       << "repr(%)" << std::setw(11) << "diversity" << '\n';
    os << std::fixed;
    for (const auto& r : reports)
        os << std::left << std::setw(10) << r.method << std::right << std::setw(10) << std::setprecision(4) << r.accuracy
           << std::setw(12) << std::setprecision(2) << 100.0 * r.representativeness << std::setw(11)
           << std::setprecision(3) << r.diversity << '\n';
    return os.str();
}

}  // namespace icl
