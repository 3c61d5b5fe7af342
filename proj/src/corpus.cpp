#include "wsieval/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wsieval/strutil.hpp"

namespace wsieval {

using json = nlohmann::json;

namespace {

VqaRecord record_from_json(const json& j, int line_no) {
    auto need = [&](const char* field) -> const json& {
        auto it = j.find(field);
        if (it == j.end()) throw MalformedLine(line_no, std::string("missing field \"") + field + "\"");
        return *it;
    };
    VqaRecord rec;
    rec.id = need("id").get<std::string>();
    rec.wsi_id = need("wsi_id").get<std::string>();

    auto cap = capability_from_string(need("capability").get<std::string>());
    if (!cap) throw MalformedLine(line_no, "unknown capability");
    rec.capability = *cap;
    auto task = task_from_string(need("task").get<std::string>());
    if (!task) throw MalformedLine(line_no, "unknown task");
    rec.task = *task;
    auto qt = question_type_from_string(need("question_type").get<std::string>());
    if (!qt) throw MalformedLine(line_no, "unknown question_type");
    rec.question_type = *qt;

    rec.question = need("question").get<std::string>();
    rec.ground_truth = need("ground_truth").get<std::string>();
    if (auto it = j.find("options"); it != j.end() && !it->is_null()) {
        for (const auto& o : *it)
            rec.options.push_back({o.at("letter").get<std::string>(), o.at("text").get<std::string>()});
    }
    if (auto it = j.find("correct_letter"); it != j.end() && !it->is_null())
        rec.correct_letter = it->get<std::string>();
    return rec;
}

json record_to_json(const VqaRecord& rec) {
    json j{{"id", rec.id},
           {"wsi_id", rec.wsi_id},
           {"capability", to_string(rec.capability)},
           {"task", to_string(rec.task)},
           {"question_type", to_string(rec.question_type)},
           {"question", rec.question},
           {"ground_truth", rec.ground_truth}};
    if (!rec.options.empty()) {
        json opts = json::array();
        for (const auto& o : rec.options) opts.push_back({{"letter", o.letter}, {"text", o.text}});
        j["options"] = opts;
    }
    if (rec.correct_letter) j["correct_letter"] = *rec.correct_letter;
    return j;
}

}  // namespace

std::optional<std::string> validate_record(const VqaRecord& rec) {
    if (rec.id.empty()) return "empty id";
    if (trim(rec.ground_truth).empty()) return "empty ground_truth";
    if (capability_of(rec.task) != rec.capability)
        return std::string("task ") + std::string(to_string(rec.task)) + " does not belong to capability " +
               std::string(to_string(rec.capability));
    if (rec.question_type == QuestionType::Closed) {
        if (rec.options.empty()) return "Closed record without options";
        if (!rec.correct_letter) return "Closed record without correct_letter";
        bool found = false;
        for (const auto& o : rec.options) found = found || o.letter == *rec.correct_letter;
        if (!found) return "correct_letter not among option letters";
    } else {
        if (!rec.options.empty() || rec.correct_letter)
            return "Open record carries MCQ fields";
    }
    return std::nullopt;
}

std::vector<VqaRecord> load_dataset(const std::filesystem::path& path, bool strict,
                                    LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open dataset file: " + path.string());

    std::vector<VqaRecord> records;
    std::set<std::string> seen_ids;
    LoadReport local;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            json j = json::parse(line, nullptr, true);
            if (!j.is_object()) throw MalformedLine(line_no, "line is not an object");
            VqaRecord rec = record_from_json(j, line_no);
            if (!seen_ids.insert(rec.id).second) throw DuplicateId(rec.id);
            if (auto err = validate_record(rec)) throw TaxonomyViolation(rec.id, *err);
            records.push_back(std::move(rec));
            ++local.loaded;
        } catch (const json::exception& e) {
            if (strict) throw MalformedLine(line_no, e.what());
            local.skipped.push_back({line_no, "", std::string("MalformedLine: ") + e.what()});
        } catch (const DuplicateId& e) {
            if (strict) throw;
            local.skipped.push_back({line_no, e.id, std::string("DuplicateId: ") + e.what()});
        } catch (const TaxonomyViolation& e) {
            if (strict) throw;
            local.skipped.push_back({line_no, e.id, std::string("TaxonomyViolation: ") + e.what()});
        } catch (const MalformedLine& e) {
            if (strict) throw;
            local.skipped.push_back({line_no, "", std::string("MalformedLine: ") + e.what()});
        }
    }
    if (report) *report = std::move(local);
    return records;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path, bool strict,
                                         LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open predictions file: " + path.string());

    std::vector<Prediction> preds;
    LoadReport local;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            json j = json::parse(line);
            Prediction p{j.at("record_id").get<std::string>(), j.at("response").get<std::string>(),
                         j.at("model_name").get<std::string>()};
            if (p.record_id.empty()) throw MalformedLine(line_no, "empty record_id");
            // Empty responses stay loadable but are flagged in the report.
            if (trim(p.response).empty())
                local.skipped.push_back({line_no, p.record_id, "EmptyResponse (loaded, flagged)"});
            preds.push_back(std::move(p));
            ++local.loaded;
        } catch (const json::exception& e) {
            if (strict) throw MalformedLine(line_no, e.what());
            local.skipped.push_back({line_no, "", std::string("MalformedLine: ") + e.what()});
        } catch (const MalformedLine&) {
            if (strict) throw;
            local.skipped.push_back({line_no, "", "MalformedLine"});
        }
    }
    if (report) *report = std::move(local);
    return preds;
}

void save_dataset(const std::filesystem::path& path, const std::vector<VqaRecord>& records) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot open for writing: " + path.string());
    for (const auto& rec : records) out << record_to_json(rec).dump() << '\n';
}

std::vector<EvalPair> pair_predictions(const std::vector<VqaRecord>& records,
                                       const std::vector<Prediction>& predictions,
                                       PairingReport* report) {
    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions) {
        auto [it, inserted] = by_id.emplace(p.record_id, &p);
        if (!inserted && it->second->model_name == p.model_name)
            throw DuplicatePrediction(p.record_id);
    }
    std::vector<const VqaRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const VqaRecord* a, const VqaRecord* b) { return a->id < b->id; });

    PairingReport local;
    std::vector<EvalPair> pairs;
    std::set<std::string> matched;
    for (const VqaRecord* rec : sorted) {
        auto it = by_id.find(rec->id);
        if (it == by_id.end()) {
            local.unmatched_record_ids.push_back(rec->id);
        } else {
            pairs.push_back({*rec, *it->second});
            matched.insert(rec->id);
        }
    }
    for (const auto& [rid, p] : by_id)
        if (!matched.count(rid)) local.orphan_prediction_ids.push_back(rid);
    if (report) *report = std::move(local);
    return pairs;
}

namespace {

// Unbiased bounded draw so sampling does not depend on the standard
// library's distribution implementation.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t threshold = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= threshold);
    return r % n;
}

}  // namespace

std::vector<EvalPair> stratified_sample(const std::vector<EvalPair>& pairs, double fraction,
                                        std::size_t min_per_stratum, std::uint64_t seed) {
    if (pairs.empty()) throw std::invalid_argument("stratified_sample: empty input");
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("stratified_sample: fraction must be in (0,1]");

    std::mt19937_64 rng(seed);
    std::vector<EvalPair> out;
    for (Capability cap : kAllCapabilities) {
        std::vector<const EvalPair*> stratum;
        for (const auto& p : pairs)
            if (p.record.capability == cap) stratum.push_back(&p);
        if (stratum.empty()) continue;
        std::sort(stratum.begin(), stratum.end(),
                  [](const EvalPair* a, const EvalPair* b) { return a->record.id < b->record.id; });

        std::size_t want = static_cast<std::size_t>(
            std::ceil(fraction * static_cast<double>(stratum.size()) - 1e-12));
        want = std::max(want, min_per_stratum);
        want = std::min(want, stratum.size());

        // Partial Fisher-Yates over indices, then restore id order.
        std::vector<std::size_t> idx(stratum.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = 0; i < want; ++i) {
            std::size_t j = i + static_cast<std::size_t>(draw_below(rng, idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        std::vector<std::size_t> chosen(idx.begin(), idx.begin() + static_cast<long>(want));
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t i : chosen) out.push_back(*stratum[i]);
    }
    return out;
}

ClosedScore score_closed_ended(const EvalPair& pair) {
    if (pair.record.question_type != QuestionType::Closed)
        throw NotClosedEnded("score_closed_ended called on an Open record: " + pair.record.id);

    // Case invariance: the letter scan runs over the uppercased response.
    std::string resp = trim(pair.prediction.response);
    std::string upper = resp;
    for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));

    std::optional<std::string> parsed;
    for (std::size_t i = 0; i < upper.size(); ++i) {
        char c = upper[i];
        if (c < 'A' || c > 'F') continue;
        bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(upper[i - 1]));
        std::size_t j = i + 1;
        // allow one trailing ')' '.' ':' ',' after the letter
        if (j < upper.size() && (upper[j] == ')' || upper[j] == '.' || upper[j] == ':' || upper[j] == ','))
            ++j;
        bool right_ok = j >= upper.size() || !std::isalnum(static_cast<unsigned char>(upper[j]));
        if (left_ok && right_ok) {
            parsed = std::string(1, c);
            break;
        }
    }

    if (!parsed) {
        // Fallback: unique normalized option-text containment.
        std::string norm_resp = normalize_text(resp);
        std::vector<std::string> hits;
        for (const auto& opt : pair.record.options) {
            std::string norm_opt = normalize_text(opt.text);
            if (!norm_opt.empty() && norm_resp.find(norm_opt) != std::string::npos)
                hits.push_back(opt.letter);
        }
        if (hits.size() == 1) parsed = hits.front();
    }

    ClosedScore result;
    result.parsed_letter = parsed;
    result.score = (parsed && pair.record.correct_letter && *parsed == *pair.record.correct_letter) ? 1 : 0;
    return result;
}

double accuracy(const std::vector<int>& scores) {
    if (scores.empty()) throw std::invalid_argument("accuracy: empty input");
    long long sum = 0;
    for (int s : scores) sum += s;
    return static_cast<double>(sum) / static_cast<double>(scores.size());
}

}  // namespace wsieval
