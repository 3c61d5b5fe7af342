#include "wsieval/agreement.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <tuple>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wsieval/strutil.hpp"

namespace wsieval {

using json = nlohmann::json;

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw LengthMismatch("pearson: vectors differ in length");
    if (x.size() < 2) throw StatError("pearson: need at least 2 points");
    double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw ZeroVariance("pearson: x has zero variance");
    if (syy == 0.0) throw ZeroVariance("pearson: y has zero variance");
    return sxy / std::sqrt(sxx * syy);
}

double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw LengthMismatch("cohen_kappa: vectors differ in length");
    if (a.empty()) throw StatError("cohen_kappa: empty input");
    std::set<int> cats(a.begin(), a.end());
    cats.insert(b.begin(), b.end());
    double n = static_cast<double>(a.size());

    double p_o = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] == b[i]) p_o += 1;
    p_o /= n;

    double p_e = 0;
    for (int c : cats) {
        double na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == c) na += 1;
            if (b[i] == c) nb += 1;
        }
        p_e += (na / n) * (nb / n);
    }
    // Both raters constant and equal: p_e = 1 forces p_o = 1; define kappa 1.
    if (p_e >= 1.0 - 1e-15) return 1.0;
    return (p_o - p_e) / (1.0 - p_e);
}

double weighted_kappa_linear(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw LengthMismatch("weighted_kappa: vectors differ in length");
    if (a.empty()) throw StatError("weighted_kappa: empty input");
    std::vector<int> cats;
    {
        std::set<int> s(a.begin(), a.end());
        s.insert(b.begin(), b.end());
        cats.assign(s.begin(), s.end());
    }
    int span = cats.back() - cats.front();
    if (span == 0) return 1.0;
    double n = static_cast<double>(a.size());
    auto weight = [&](int ca, int cb) {
        return 1.0 - std::abs(ca - cb) / static_cast<double>(span);
    };
    double p_o = 0;
    for (std::size_t i = 0; i < a.size(); ++i) p_o += weight(a[i], b[i]);
    p_o /= n;
    double p_e = 0;
    for (int ca : cats)
        for (int cb : cats) {
            double na = 0, nb = 0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (a[i] == ca) na += 1;
                if (b[i] == cb) nb += 1;
            }
            p_e += weight(ca, cb) * (na / n) * (nb / n);
        }
    if (p_e >= 1.0 - 1e-15) return 1.0;
    return (p_o - p_e) / (1.0 - p_e);
}

double fleiss_kappa(const std::vector<std::vector<int>>& item_category_counts) {
    if (item_category_counts.empty()) throw StatError("fleiss_kappa: no items");
    std::size_t k = item_category_counts.front().size();
    double n_items = static_cast<double>(item_category_counts.size());
    double raters = 0;
    for (int c : item_category_counts.front()) raters += c;
    if (raters < 2) throw InsufficientRaters("fleiss_kappa: need >= 2 ratings per item");

    std::vector<double> p_cat(k, 0.0);
    double p_bar = 0.0;
    for (const auto& row : item_category_counts) {
        if (row.size() != k) throw LengthMismatch("fleiss_kappa: ragged category counts");
        double total = 0, agree = 0;
        for (std::size_t j = 0; j < k; ++j) {
            total += row[j];
            agree += static_cast<double>(row[j]) * (row[j] - 1);
            p_cat[j] += row[j];
        }
        if (total != raters) throw StatError("fleiss_kappa: items rated by differing rater counts");
        p_bar += agree / (raters * (raters - 1));
    }
    p_bar /= n_items;
    double p_e = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double p = p_cat[j] / (n_items * raters);
        p_e += p * p;
    }
    if (p_e >= 1.0 - 1e-15) return 1.0;
    return (p_bar - p_e) / (1.0 - p_e);
}

MeanKappaResult mean_pairwise_kappa(const std::vector<HumanAnnotation>& annotations) {
    std::set<std::string> raters;
    // (rater, pair_id, metric) -> tenths
    std::map<std::tuple<std::string, std::string, std::string>, int> scores;
    for (const auto& a : annotations) {
        raters.insert(a.rater_id);
        scores[{a.rater_id, a.pair_id, std::string(to_string(a.metric))}] = a.score.tenths();
    }
    if (raters.size() < 2) throw InsufficientRaters("mean_pairwise_kappa: need >= 2 raters");

    MeanKappaResult out;
    std::vector<std::string> rater_list(raters.begin(), raters.end());
    double sum = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < rater_list.size(); ++i) {
        for (std::size_t j = i + 1; j < rater_list.size(); ++j) {
            std::vector<int> va, vb;
            for (const auto& [key, tenths] : scores) {
                if (std::get<0>(key) != rater_list[i]) continue;
                auto other = scores.find({rater_list[j], std::get<1>(key), std::get<2>(key)});
                if (other == scores.end()) continue;
                va.push_back(tenths);
                vb.push_back(other->second);
            }
            if (va.empty()) {
                out.skipped_pairs.emplace_back(rater_list[i], rater_list[j]);
                continue;
            }
            double k = cohen_kappa(va, vb);
            out.matrix.push_back({rater_list[i], rater_list[j], k, va.size()});
            sum += k;
            ++pairs;
        }
    }
    if (pairs == 0) throw NoOverlap("mean_pairwise_kappa: no rater pair shares any item");
    out.mean = sum / static_cast<double>(pairs);
    return out;
}

AgreementReport validate_metrics(const std::vector<MetricResult>& automated,
                                 const std::vector<HumanAnnotation>& human) {
    AgreementReport report;

    // per-item mean human score, and per-rater series
    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> human_mean;
    std::map<std::string, std::map<std::pair<std::string, std::string>, double>> per_rater;
    for (const auto& h : human) {
        auto key = std::make_pair(h.pair_id, std::string(to_string(h.metric)));
        auto& [sum, count] = human_mean[key];
        sum += h.score.value();
        count += 1;
        per_rater[h.rater_id][key] = h.score.value();
    }

    for (const char* metric : {"WSI-Precision", "WSI-Relevance"}) {
        std::vector<double> xs, ys;
        double auto_sum = 0, human_sum = 0;
        for (const auto& r : automated) {
            if (to_string(r.metric) != metric) continue;
            auto it = human_mean.find({r.pair_id, metric});
            if (it == human_mean.end()) continue;
            double h = it->second.first / static_cast<double>(it->second.second);
            xs.push_back(r.value);
            ys.push_back(h);
            auto_sum += r.value;
            human_sum += h;
        }
        if (xs.empty()) continue;
        if (xs.size() < 2) throw NoOverlap(std::string("validate_metrics: fewer than 2 overlapping points for ") + metric);
        report.pearson_per_metric[metric] = pearson(xs, ys);
        report.sample_sizes[metric] = xs.size();
        report.mean_automated[metric] = auto_sum / static_cast<double>(xs.size());
        report.mean_human[metric] = human_sum / static_cast<double>(xs.size());

        for (const auto& [rater, series] : per_rater) {
            std::vector<double> rx, ry;
            for (const auto& r : automated) {
                if (to_string(r.metric) != metric) continue;
                auto it = series.find({r.pair_id, std::string(metric)});
                if (it == series.end()) continue;
                rx.push_back(r.value);
                ry.push_back(it->second);
            }
            if (rx.size() >= 2) {
                try {
                    report.per_rater_pearson[metric][rater] = pearson(rx, ry);
                } catch (const ZeroVariance&) {
                    // constant rater; omitted from per-rater correlations
                }
            }
        }
    }
    if (report.pearson_per_metric.empty())
        throw NoOverlap("validate_metrics: no overlap between automated and human scores");

    std::set<std::string> raters;
    for (const auto& h : human) raters.insert(h.rater_id);
    if (raters.size() >= 2) {
        auto mk = mean_pairwise_kappa(human);
        report.mean_kappa = mk.mean;
        report.kappa_matrix = std::move(mk.matrix);
    }
    return report;
}

namespace {

std::string iso_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

}  // namespace

std::vector<HumanAnnotation> load_annotations(const std::filesystem::path& path) {
    std::vector<HumanAnnotation> out;
    std::ifstream in(path);
    if (!in) return out;  // absent file = no annotations yet
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        HumanAnnotation a;
        a.pair_id = j.at("pair_id").get<std::string>();
        a.rater_id = j.at("rater_id").get<std::string>();
        auto metric = claim_metric_from_string(j.at("metric").get<std::string>());
        if (!metric)
            throw StatError("annotation line " + std::to_string(line_no) + ": unknown metric");
        a.metric = *metric;
        auto score = RubricScore::from_double(j.at("score").get<double>());
        if (!score)
            throw StatError("annotation line " + std::to_string(line_no) + ": score outside rubric set");
        a.score = *score;
        a.timestamp = j.value("timestamp", "");
        out.push_back(std::move(a));
    }
    return out;
}

void append_annotation(const std::filesystem::path& path, const HumanAnnotation& annotation) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw StatError("cannot open annotation file for append: " + path.string());
    json j{{"pair_id", annotation.pair_id},
           {"rater_id", annotation.rater_id},
           {"metric", to_string(annotation.metric)},
           {"score", annotation.score.value()},
           {"timestamp", annotation.timestamp}};
    out << j.dump() << '\n';
}

std::vector<HumanAnnotation> annotate(const std::vector<EvalPair>& pairs,
                                      const std::string& rater_id,
                                      const std::filesystem::path& annotation_file,
                                      std::istream& in, std::ostream& out) {
    auto existing = load_annotations(annotation_file);
    std::set<std::pair<std::string, std::string>> done;  // (pair_id, metric)
    for (const auto& a : existing)
        if (a.rater_id == rater_id) done.insert({a.pair_id, std::string(to_string(a.metric))});

    std::vector<HumanAnnotation> session;
    for (const auto& pair : pairs) {
        bool p_done = done.count({pair.record.id, "WSI-Precision"}) > 0;
        bool r_done = done.count({pair.record.id, "WSI-Relevance"}) > 0;
        if (p_done && r_done) continue;

        out << "\n=== " << pair.record.id << " [" << to_string(pair.record.task) << "] ===\n"
            << "Question:     " << pair.record.question << '\n'
            << "Ground truth: " << pair.record.ground_truth << '\n'
            << "Response:     " << pair.prediction.response << '\n';

        for (ClaimMetric metric : {ClaimMetric::WsiPrecision, ClaimMetric::WsiRelevance}) {
            if (done.count({pair.record.id, std::string(to_string(metric))})) continue;
            std::optional<RubricScore> score;
            while (!score) {
                out << to_string(metric) << " score {0, 0.3, 0.7, 1}: " << std::flush;
                std::string entry;
                if (!std::getline(in, entry))
                    throw StatError("annotation session interrupted; progress saved");
                try {
                    score = RubricScore::from_double(std::stod(trim(entry)));
                } catch (...) {
                    score = std::nullopt;
                }
                if (!score) out << "not in the rubric set, try again\n";
            }
            HumanAnnotation a{pair.record.id, rater_id, metric, *score, iso_now()};
            append_annotation(annotation_file, a);
            session.push_back(std::move(a));
        }
    }
    return session;
}

}  // namespace wsieval
