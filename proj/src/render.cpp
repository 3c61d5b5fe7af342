#include "wsieval/render.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace wsieval {

using json = nlohmann::json;

std::string format_score(double v) {
    // round half away from zero at 3 decimals
    double scaled = v * 1000.0;
    double rounded = v >= 0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << rounded / 1000.0;
    return out.str();
}

namespace {

std::vector<std::string> best_marks(const AggregateTable& table) {
    // column label for which each model holds the best (max) cell
    std::vector<std::string> best(table.columns.size());
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        double best_val = -1;
        for (const auto& model : table.models) {
            auto it = table.cells.find({model, table.columns[c]});
            if (it != table.cells.end() && it->second.mean > best_val) {
                best_val = it->second.mean;
                best[c] = model;
            }
        }
    }
    return best;
}

}  // namespace

std::string render_table(const AggregateTable& table, TableFormat format, bool mark_best) {
    auto best = mark_best ? best_marks(table) : std::vector<std::string>{};

    auto cell_text = [&](const std::string& model, std::size_t c) -> std::string {
        auto it = table.cells.find({model, table.columns[c]});
        if (it == table.cells.end()) return "-";
        std::string s = format_score(it->second.mean);
        if (mark_best && best[c] == model) s += "*";
        return s;
    };

    if (format == TableFormat::Json) {
        json rows = json::array();
        for (const auto& model : table.models) {
            json row{{"model", model}};
            json cols = json::object();
            bool any = false;
            for (std::size_t c = 0; c < table.columns.size(); ++c) {
                auto it = table.cells.find({model, table.columns[c]});
                if (it == table.cells.end()) continue;
                cols[table.columns[c]] = {{"mean", it->second.mean}, {"count", it->second.count}};
                any = true;
            }
            row["columns"] = cols;
            if (any) row["average"] = table.overall_average(model);
            rows.push_back(row);
        }
        return rows.dump(2) + "\n";
    }

    std::ostringstream out;
    if (format == TableFormat::Csv) {
        out << "Model";
        for (const auto& col : table.columns) out << ',' << col;
        out << ",Average\n";
        for (const auto& model : table.models) {
            out << model;
            for (std::size_t c = 0; c < table.columns.size(); ++c) out << ',' << cell_text(model, c);
            out << ',' << format_score(table.overall_average(model)) << '\n';
        }
        return out.str();
    }

    // Markdown with aligned columns.
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"Model"};
    for (const auto& col : table.columns) header.push_back(col);
    header.push_back("Average");
    grid.push_back(header);
    for (const auto& model : table.models) {
        std::vector<std::string> row{model};
        for (std::size_t c = 0; c < table.columns.size(); ++c) row.push_back(cell_text(model, c));
        row.push_back(format_score(table.overall_average(model)));
        grid.push_back(row);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : grid)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    auto emit_row = [&](const std::vector<std::string>& row) {
        out << '|';
        for (std::size_t c = 0; c < row.size(); ++c)
            out << ' ' << std::left << std::setw(static_cast<int>(width[c])) << row[c] << " |";
        out << '\n';
    };
    emit_row(grid[0]);
    out << '|';
    for (std::size_t c = 0; c < width.size(); ++c) out << ' ' << std::string(width[c], '-') << " |";
    out << '\n';
    for (std::size_t r = 1; r < grid.size(); ++r) emit_row(grid[r]);
    return out.str();
}

std::string metric_results_to_jsonl(const std::vector<MetricResult>& results) {
    std::ostringstream out;
    for (const auto& r : results) {
        json scores = json::array();
        for (const auto& cs : r.claim_scores)
            scores.push_back({{"index", cs.claim.index},
                              {"claim", cs.claim.text},
                              {"explanation", cs.explanation},
                              {"score", cs.score.value()}});
        json digests = json::array();
        for (const auto& t : r.transcripts) digests.push_back(t.request_digest);
        json j{{"pair_id", r.pair_id},
               {"metric", to_string(r.metric)},
               {"value", r.value},
               {"claim_scores", scores},
               {"transcript_digests", digests}};
        if (!r.flags.empty()) j["flags"] = r.flags;
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<MetricResult> metric_results_from_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open results file: " + path.string());
    std::vector<MetricResult> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        MetricResult r;
        r.pair_id = j.at("pair_id").get<std::string>();
        auto metric = claim_metric_from_string(j.at("metric").get<std::string>());
        if (!metric) throw std::runtime_error("results file: unknown metric name");
        r.metric = *metric;
        r.value = j.at("value").get<double>();
        for (const auto& cs : j.value("claim_scores", json::array())) {
            auto score = RubricScore::from_double(cs.at("score").get<double>());
            if (!score) throw std::runtime_error("results file: score outside rubric set");
            r.claim_scores.push_back({{cs.at("index").get<int>(), cs.at("claim").get<std::string>()},
                                      *score,
                                      cs.value("explanation", "")});
        }
        if (j.contains("flags")) r.flags = j.at("flags").get<std::vector<std::string>>();
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

json nlu_metadata(const NluConfig& config) {
    return {{"bleu_smoothing", config.smoothing == BleuSmoothing::AddOne ? "add-one" : "none"},
            {"rouge_beta", config.rouge_beta},
            {"meteor",
             {{"alpha", config.meteor_params.alpha},
              {"beta", config.meteor_params.beta},
              {"gamma", config.meteor_params.gamma},
              {"stages", json::array({"exact", "stem"})}}}};
}

}  // namespace

json nlu_scores_to_json(const NluScores& scores, const NluConfig& config) {
    return {{"bleu1", scores.bleu1},
            {"bleu2", scores.bleu2},
            {"bleu3", scores.bleu3},
            {"bleu4", scores.bleu4},
            {"rouge_l_p", scores.rouge_l_p},
            {"rouge_l_r", scores.rouge_l_r},
            {"rouge_l_f", scores.rouge_l_f},
            {"meteor", scores.meteor},
            {"metadata", nlu_metadata(config)}};
}

std::string nlu_scores_to_csv(const NluScores& scores, const NluConfig& config) {
    std::ostringstream out;
    out << "BLEU-1,BLEU-2,BLEU-3,BLEU-4,ROUGE-L,METEOR,smoothing,rouge_beta\n"
        << format_score(scores.bleu1) << ',' << format_score(scores.bleu2) << ','
        << format_score(scores.bleu3) << ',' << format_score(scores.bleu4) << ','
        << format_score(scores.rouge_l_f) << ',' << format_score(scores.meteor) << ','
        << (config.smoothing == BleuSmoothing::AddOne ? "add-one" : "none") << ','
        << config.rouge_beta << '\n';
    return out.str();
}

std::string agreement_report_to_markdown(const AgreementReport& report) {
    std::ostringstream out;
    out << "| Metric | Pearson r | n | mean automated | mean human |\n"
        << "| --- | --- | --- | --- | --- |\n";
    for (const auto& [metric, r] : report.pearson_per_metric) {
        out << "| " << metric << " | " << format_score(r) << " | " << report.sample_sizes.at(metric)
            << " | " << format_score(report.mean_automated.at(metric)) << " | "
            << format_score(report.mean_human.at(metric)) << " |\n";
    }
    if (!report.kappa_matrix.empty()) {
        out << "\nMean pairwise Cohen's kappa: " << format_score(report.mean_kappa) << "\n\n"
            << "| Rater A | Rater B | kappa | overlap |\n| --- | --- | --- | --- |\n";
        for (const auto& pk : report.kappa_matrix)
            out << "| " << pk.rater_a << " | " << pk.rater_b << " | " << format_score(pk.kappa)
                << " | " << pk.overlap << " |\n";
    }
    return out.str();
}

std::string agreement_report_to_csv(const AgreementReport& report) {
    std::ostringstream out;
    out << "metric,pearson,n,mean_automated,mean_human\n";
    for (const auto& [metric, r] : report.pearson_per_metric)
        out << metric << ',' << format_score(r) << ',' << report.sample_sizes.at(metric) << ','
            << format_score(report.mean_automated.at(metric)) << ','
            << format_score(report.mean_human.at(metric)) << '\n';
    if (!report.kappa_matrix.empty()) {
        out << "rater_a,rater_b,kappa,overlap\n";
        for (const auto& pk : report.kappa_matrix)
            out << pk.rater_a << ',' << pk.rater_b << ',' << format_score(pk.kappa) << ','
                << pk.overlap << '\n';
        out << "mean_pairwise_kappa," << format_score(report.mean_kappa) << ",,,\n";
    }
    return out.str();
}

}  // namespace wsieval
