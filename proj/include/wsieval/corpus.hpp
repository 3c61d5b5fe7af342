#pragma once
// Benchmark data model: records, predictions, pairing, stratified sampling
// and closed-ended (MCQ) scoring.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wsieval/types.hpp"

namespace wsieval {

struct McqOption {
    std::string letter;  // single uppercase letter
    std::string text;

    bool operator==(const McqOption&) const = default;
};

struct VqaRecord {
    std::string id;
    std::string wsi_id;
    Capability capability = Capability::MorphologicalAnalysis;
    Task task = Task::GlobalMorphologyDescription;
    QuestionType question_type = QuestionType::Open;
    std::string question;
    std::string ground_truth;
    std::vector<McqOption> options;        // non-empty iff Closed
    std::optional<std::string> correct_letter;

    bool operator==(const VqaRecord&) const = default;
};

struct Prediction {
    std::string record_id;
    std::string response;
    std::string model_name;

    bool operator==(const Prediction&) const = default;
};

struct EvalPair {
    VqaRecord record;
    Prediction prediction;
};

struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FileNotFound : LoadError {
    using LoadError::LoadError;
};
struct MalformedLine : LoadError {
    int line_no;
    MalformedLine(int line, const std::string& what)
        : LoadError("line " + std::to_string(line) + ": " + what), line_no(line) {}
};
struct DuplicateId : LoadError {
    std::string id;
    explicit DuplicateId(std::string dup)
        : LoadError("duplicate record id: " + dup), id(std::move(dup)) {}
};
struct TaxonomyViolation : LoadError {
    std::string id;
    TaxonomyViolation(std::string rec_id, const std::string& what)
        : LoadError("record " + rec_id + ": " + what), id(std::move(rec_id)) {}
};
struct DuplicatePrediction : std::runtime_error {
    std::string record_id;
    explicit DuplicatePrediction(std::string rid)
        : std::runtime_error("duplicate prediction for record " + rid),
          record_id(std::move(rid)) {}
};

struct SkippedRecord {
    int line_no = 0;
    std::string id;      // may be empty when the line never parsed
    std::string reason;  // error class name + detail
};

struct LoadReport {
    std::size_t loaded = 0;
    std::vector<SkippedRecord> skipped;
};

// Checks all record invariants; returns an error description or nullopt.
std::optional<std::string> validate_record(const VqaRecord& rec);

// Line-delimited records, one JSON object per line. In strict mode the first
// violation throws; in lenient mode bad records are skipped and reported.
std::vector<VqaRecord> load_dataset(const std::filesystem::path& path, bool strict,
                                    LoadReport* report = nullptr);
std::vector<Prediction> load_predictions(const std::filesystem::path& path, bool strict,
                                         LoadReport* report = nullptr);

void save_dataset(const std::filesystem::path& path, const std::vector<VqaRecord>& records);

struct PairingReport {
    std::vector<std::string> unmatched_record_ids;
    std::vector<std::string> orphan_prediction_ids;
};

// One pair per id match, ordered by record id. Throws DuplicatePrediction when
// two predictions from the same model target one record.
std::vector<EvalPair> pair_predictions(const std::vector<VqaRecord>& records,
                                       const std::vector<Prediction>& predictions,
                                       PairingReport* report = nullptr);

// Per capability stratum draws max(min_per_stratum, ceil(fraction * size))
// pairs (clamped to the stratum size) without replacement. Output is ordered
// by stratum, then record id; a given seed always produces the same sample.
std::vector<EvalPair> stratified_sample(const std::vector<EvalPair>& pairs, double fraction,
                                        std::size_t min_per_stratum, std::uint64_t seed);

struct ClosedScore {
    int score = 0;  // 1 iff parsed letter equals correct_letter
    std::optional<std::string> parsed_letter;
};

struct NotClosedEnded : std::logic_error {
    using std::logic_error::logic_error;
};

// Letter extraction first (standalone A-F, case-insensitive, optionally
// parenthesized or followed by ')' '.' ':'), then unique option-text match.
ClosedScore score_closed_ended(const EvalPair& pair);

double accuracy(const std::vector<int>& scores);

}  // namespace wsieval
