#pragma once
// Table rendering and result serialization. All numbers print with three
// decimals, rounding half away from zero.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wsieval/agreement.hpp"
#include "wsieval/claimeval.hpp"
#include "wsieval/textmetrics.hpp"

namespace wsieval {

enum class TableFormat { Csv, Markdown, Json };

std::string format_score(double v);  // "0.754"

std::string render_table(const AggregateTable& table, TableFormat format,
                         bool mark_best_per_column = false);

// One JSON object per result; transcripts referenced by digest only.
std::string metric_results_to_jsonl(const std::vector<MetricResult>& results);
std::vector<MetricResult> metric_results_from_jsonl(const std::filesystem::path& path);

nlohmann::json nlu_scores_to_json(const NluScores& scores, const NluConfig& config);
std::string nlu_scores_to_csv(const NluScores& scores, const NluConfig& config);

std::string agreement_report_to_markdown(const AgreementReport& report);
std::string agreement_report_to_csv(const AgreementReport& report);

}  // namespace wsieval
