#include "wsieval/claimeval.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "wsieval/strutil.hpp"

namespace wsieval {

std::string_view to_string(ClaimMetric m) {
    return m == ClaimMetric::WsiPrecision ? "WSI-Precision" : "WSI-Relevance";
}

std::optional<ClaimMetric> claim_metric_from_string(std::string_view s) {
    if (s == "WSI-Precision" || s == "precision") return ClaimMetric::WsiPrecision;
    if (s == "WSI-Relevance" || s == "relevance") return ClaimMetric::WsiRelevance;
    return std::nullopt;
}

namespace {

double exact_mean(const std::vector<ClaimScore>& scores) {
    std::vector<RubricScore> values;
    values.reserve(scores.size());
    for (const auto& s : scores) values.push_back(s.score);
    return rubric_mean(values);
}

}  // namespace

MetricResult wsi_precision(const std::string& ground_truth, const std::string& response,
                           ClaimJudge& judge) {
    MetricResult result;
    result.metric = ClaimMetric::WsiPrecision;
    auto extraction = judge.extract_claims(ground_truth);
    result.transcripts.push_back(extraction.transcript);
    if (extraction.claims.empty()) throw EmptyClaims("wsi_precision: extraction yielded no claims");
    auto scoring = judge.score_claims(extraction.claims, response, ScoreMode::Precision);
    result.transcripts.push_back(scoring.transcript);
    result.claim_scores = std::move(scoring.scores);
    result.value = exact_mean(result.claim_scores);
    if (trim(response).empty()) result.flags.push_back("empty_response");
    return result;
}

MetricResult wsi_relevance(const std::string& ground_truth, const std::string& response,
                           ClaimJudge& judge) {
    MetricResult result;
    result.metric = ClaimMetric::WsiRelevance;
    if (trim(response).empty()) {
        // Policy for empty model responses: relevance has nothing to extract
        // claims from; record a zero with an explicit flag.
        result.value = 0.0;
        result.flags.push_back("empty_response");
        return result;
    }
    auto extraction = judge.extract_claims(response);
    result.transcripts.push_back(extraction.transcript);
    auto scoring = judge.score_claims(extraction.claims, ground_truth, ScoreMode::Relevance);
    result.transcripts.push_back(scoring.transcript);
    result.claim_scores = std::move(scoring.scores);
    result.value = exact_mean(result.claim_scores);
    return result;
}

OpenSetResult evaluate_open_set(const std::vector<EvalPair>& pairs,
                                const std::vector<ClaimMetric>& metrics, ClaimJudge& judge,
                                int concurrency) {
    struct Job {
        const EvalPair* pair;
        ClaimMetric metric;
    };
    std::vector<Job> jobs;
    for (const auto& pair : pairs)
        for (ClaimMetric m : metrics) jobs.push_back({&pair, m});

    std::vector<std::optional<MetricResult>> slots(jobs.size());
    std::vector<std::optional<PairFailure>> fails(jobs.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job& job = jobs[i];
            try {
                MetricResult r = job.metric == ClaimMetric::WsiPrecision
                                     ? wsi_precision(job.pair->record.ground_truth,
                                                     job.pair->prediction.response, judge)
                                     : wsi_relevance(job.pair->record.ground_truth,
                                                     job.pair->prediction.response, judge);
                r.pair_id = job.pair->record.id;
                slots[i] = std::move(r);
            } catch (const std::exception& e) {
                fails[i] = PairFailure{job.pair->record.id, job.metric, e.what()};
            }
        }
    };

    int threads = std::max(1, std::min<int>(concurrency, static_cast<int>(jobs.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    OpenSetResult out;
    for (auto& slot : slots)
        if (slot) out.results.push_back(std::move(*slot));
    for (auto& fail : fails)
        if (fail) out.failures.push_back(std::move(*fail));

    auto key = [](const MetricResult& r) { return std::make_pair(r.pair_id, to_string(r.metric)); };
    std::sort(out.results.begin(), out.results.end(),
              [&](const MetricResult& a, const MetricResult& b) { return key(a) < key(b); });
    std::sort(out.failures.begin(), out.failures.end(), [](const PairFailure& a, const PairFailure& b) {
        return std::make_pair(a.pair_id, to_string(a.metric)) <
               std::make_pair(b.pair_id, to_string(b.metric));
    });
    return out;
}

double AggregateTable::overall_average(const std::string& model) const {
    std::vector<double> values;
    for (const auto& col : columns) {
        auto it = cells.find({model, col});
        if (it != cells.end()) values.push_back(it->second.mean);
    }
    return row_average(values);
}

double row_average(const std::vector<double>& column_values) {
    if (column_values.empty()) throw std::invalid_argument("row_average: no column values");
    double sum = 0.0;
    for (double v : column_values) sum += v;
    return sum / static_cast<double>(column_values.size());
}

AggregateTable aggregate(const std::vector<ScoredItem>& items, Grouping grouping) {
    AggregateTable table;
    table.grouping = grouping;

    auto column_label = [&](const ScoredItem& item) {
        std::string group = grouping == Grouping::Capability
                                ? std::string(to_string(item.capability))
                                : std::string(to_string(item.task));
        return group + "/" + item.metric_name;
    };

    struct Acc {
        double sum = 0.0;
        std::size_t count = 0;
    };
    std::map<std::pair<std::string, std::string>, Acc> acc;
    std::vector<std::string> column_order;
    // Column order follows the taxonomy (capability/task enum order), with
    // metric names sorted within a group.
    auto add_column = [&](const std::string& label) {
        if (std::find(column_order.begin(), column_order.end(), label) == column_order.end())
            column_order.push_back(label);
    };
    if (grouping == Grouping::Capability) {
        for (Capability c : kAllCapabilities)
            for (const char* m : {"WSI-Precision", "WSI-Relevance", "Acc"})
                for (const auto& item : items)
                    if (item.capability == c && item.metric_name == m)
                        add_column(std::string(to_string(c)) + "/" + m);
    } else {
        for (Task t : kAllTasks)
            for (const char* m : {"WSI-Precision", "WSI-Relevance", "Acc"})
                for (const auto& item : items)
                    if (item.task == t && item.metric_name == m)
                        add_column(std::string(to_string(t)) + "/" + m);
    }

    for (const auto& item : items) {
        auto& a = acc[{item.model, column_label(item)}];
        a.sum += item.value;
        a.count += 1;
        if (std::find(table.models.begin(), table.models.end(), item.model) == table.models.end())
            table.models.push_back(item.model);
    }
    std::sort(table.models.begin(), table.models.end());
    table.columns = std::move(column_order);
    for (const auto& [key, a] : acc)
        table.cells[key] = {a.sum / static_cast<double>(a.count), a.count};
    return table;
}

}  // namespace wsieval
