#pragma once
// WSI-Precision / WSI-Relevance orchestration and table aggregation.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wsieval/corpus.hpp"
#include "wsieval/judge.hpp"
#include "wsieval/types.hpp"

namespace wsieval {

enum class ClaimMetric { WsiPrecision, WsiRelevance };

std::string_view to_string(ClaimMetric m);
std::optional<ClaimMetric> claim_metric_from_string(std::string_view s);

struct MetricResult {
    std::string pair_id;
    ClaimMetric metric = ClaimMetric::WsiPrecision;
    std::vector<ClaimScore> claim_scores;
    double value = 0.0;  // exact mean of claim scores (integer-tenths sum)
    std::vector<JudgeTranscript> transcripts;
    // "empty_response": relevance on an empty model response, scored 0.
    std::vector<std::string> flags;
};

// Claims extracted from ground_truth, each scored against response.
MetricResult wsi_precision(const std::string& ground_truth, const std::string& response,
                           ClaimJudge& judge);
// Claims extracted from response, each scored against ground_truth.
MetricResult wsi_relevance(const std::string& ground_truth, const std::string& response,
                           ClaimJudge& judge);

struct PairFailure {
    std::string pair_id;
    ClaimMetric metric;
    std::string error;
};

struct OpenSetResult {
    std::vector<MetricResult> results;  // ordered by (pair_id, metric)
    std::vector<PairFailure> failures;
};

// Runs the requested metrics over all pairs with at most `concurrency`
// worker threads. Output ordering does not depend on scheduling.
OpenSetResult evaluate_open_set(const std::vector<EvalPair>& pairs,
                                const std::vector<ClaimMetric>& metrics, ClaimJudge& judge,
                                int concurrency = 1);

// One scored data point for aggregation; metric_name is a printable column
// name ("WSI-Precision", "WSI-Relevance", "Acc").
struct ScoredItem {
    std::string model;
    Capability capability = Capability::MorphologicalAnalysis;
    Task task = Task::GlobalMorphologyDescription;
    QuestionType question_type = QuestionType::Open;
    std::string metric_name;
    double value = 0.0;
};

enum class Grouping { Capability, Task };

struct AggregateCell {
    double mean = 0.0;
    std::size_t count = 0;
};

struct AggregateTable {
    Grouping grouping = Grouping::Capability;
    // column label -> per-model cell; column labels are ordered.
    std::vector<std::string> columns;
    std::vector<std::string> models;  // sorted
    std::map<std::pair<std::string, std::string>, AggregateCell> cells;  // (model, column)

    // The paper's convention: unweighted mean over the model's present
    // column values, not a pair-pooled mean.
    double overall_average(const std::string& model) const;
};

AggregateTable aggregate(const std::vector<ScoredItem>& items, Grouping grouping);

// Mean of summary column values; the row-average convention by itself.
double row_average(const std::vector<double>& column_values);

}  // namespace wsieval
