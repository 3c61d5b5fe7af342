#pragma once
// Core domain types shared across the toolkit: the capability/task taxonomy,
// question types, and the four-point rubric used for claim scoring.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wsieval {

enum class Capability {
    MorphologicalAnalysis,
    Diagnosis,
    TreatmentPlanning,
    ReportGeneration,
};

enum class Task {
    GlobalMorphologyDescription,
    KeyDiagnosticDescription,
    RegionalStructureDescription,
    SpecificFeatureDescription,
    HistologicalTyping,
    Grading,
    MolecularSubtyping,
    Staging,
    TreatmentRecommendations,
    Prognosis,
    ReportGeneration,
};

enum class QuestionType { Open, Closed };

inline constexpr std::array<Capability, 4> kAllCapabilities = {
    Capability::MorphologicalAnalysis,
    Capability::Diagnosis,
    Capability::TreatmentPlanning,
    Capability::ReportGeneration,
};

inline constexpr std::array<Task, 11> kAllTasks = {
    Task::GlobalMorphologyDescription, Task::KeyDiagnosticDescription,
    Task::RegionalStructureDescription, Task::SpecificFeatureDescription,
    Task::HistologicalTyping,           Task::Grading,
    Task::MolecularSubtyping,           Task::Staging,
    Task::TreatmentRecommendations,     Task::Prognosis,
    Task::ReportGeneration,
};

// Which capability each task belongs to.
Capability capability_of(Task task);

std::string_view to_string(Capability c);
std::string_view to_string(Task t);
std::string_view to_string(QuestionType q);

std::optional<Capability> capability_from_string(std::string_view s);
std::optional<Task> task_from_string(std::string_view s);
std::optional<QuestionType> question_type_from_string(std::string_view s);

// Claim scores are multiples of 0.1 drawn from {0, 0.3, 0.7, 1}. They are
// held as integer tenths so that sums and means stay exact.
class RubricScore {
public:
    static std::optional<RubricScore> from_double(double v);
    static std::optional<RubricScore> from_tenths(int t);

    int tenths() const { return tenths_; }
    double value() const { return tenths_ / 10.0; }

    bool operator==(const RubricScore&) const = default;

private:
    explicit RubricScore(int t) : tenths_(t) {}
    int tenths_ = 0;
};

inline std::optional<RubricScore> RubricScore::from_tenths(int t) {
    if (t == 0 || t == 3 || t == 7 || t == 10) return RubricScore(t);
    return std::nullopt;
}

inline std::optional<RubricScore> RubricScore::from_double(double v) {
    // Accept only values that are exactly one of the rubric points (up to
    // representation noise); never round other values.
    for (int t : {0, 3, 7, 10}) {
        if (v > t / 10.0 - 1e-9 && v < t / 10.0 + 1e-9) return RubricScore(t);
    }
    return std::nullopt;
}

// Exact mean of rubric scores: integer-tenths accumulation, one division.
double rubric_mean(const std::vector<RubricScore>& scores);

}  // namespace wsieval
