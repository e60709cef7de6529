#pragma once

#include <functional>
#include <string>
#include <vector>

#include "icl/backend.hpp"

namespace icl {

/// argmax of the backend's class scores, ties to the lowest class.
int predict_label(const Backend& backend, const Query& q, std::span<const int> ids, StateCache* cache = nullptr);

double accuracy(const Backend& backend, const std::vector<IdTuple>& selections, const std::vector<Query>& queries,
                StateCache* cache = nullptr);

/// Mean of P(gold | z, x) over queries.
double mean_gold_probability(const Backend& backend, const std::vector<IdTuple>& selections,
                             const std::vector<Query>& queries, StateCache* cache = nullptr);

/// |union of selected ids| / N, as a fraction.
double representativeness(const std::vector<IdTuple>& selections, int corpus_size);

/// Mean over selections of the number of distinct labels in the tuple.
double diversity(const std::vector<IdTuple>& selections, const Corpus& corpus);

struct QueryRecord {
    int query_id = 0;
    IdTuple ids;
    int predicted = 0;
    int gold = 0;
    double gold_logprob = 0;
};

struct EvalReport {
    std::string method;
    double accuracy = 0;
    double representativeness = 0;
    double diversity = 0;
    std::vector<QueryRecord> records;
};

struct Method {
    std::string name;
    std::function<IdTuple(const Query&)> select;
};

EvalReport evaluate(const Method& method, const Backend& backend, const std::vector<Query>& queries,
                    StateCache* cache = nullptr);

std::vector<EvalReport> compare(const std::vector<Method>& methods, const Backend& backend,
                                const std::vector<Query>& queries, StateCache* cache = nullptr);

/// CSV with a "# config_hash=..." comment line then a header row.
std::string report_csv(const std::vector<EvalReport>& reports, const std::string& config_hash);
std::string detail_csv(const std::vector<EvalReport>& reports, const std::string& config_hash);
std::string report_table(const std::vector<EvalReport>& reports);

}  // namespace icl
