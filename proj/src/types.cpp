#include "wsieval/types.hpp"

namespace wsieval {

Capability capability_of(Task task) {
    switch (task) {
        case Task::GlobalMorphologyDescription:
        case Task::KeyDiagnosticDescription:
        case Task::RegionalStructureDescription:
        case Task::SpecificFeatureDescription:
            return Capability::MorphologicalAnalysis;
        case Task::HistologicalTyping:
        case Task::Grading:
        case Task::MolecularSubtyping:
        case Task::Staging:
            return Capability::Diagnosis;
        case Task::TreatmentRecommendations:
        case Task::Prognosis:
            return Capability::TreatmentPlanning;
        case Task::ReportGeneration:
            return Capability::ReportGeneration;
    }
    throw std::logic_error("capability_of: unknown task");
}

std::string_view to_string(Capability c) {
    switch (c) {
        case Capability::MorphologicalAnalysis: return "MorphologicalAnalysis";
        case Capability::Diagnosis: return "Diagnosis";
        case Capability::TreatmentPlanning: return "TreatmentPlanning";
        case Capability::ReportGeneration: return "ReportGeneration";
    }
    return "?";
}

std::string_view to_string(Task t) {
    switch (t) {
        case Task::GlobalMorphologyDescription: return "GlobalMorphologyDescription";
        case Task::KeyDiagnosticDescription: return "KeyDiagnosticDescription";
        case Task::RegionalStructureDescription: return "RegionalStructureDescription";
        case Task::SpecificFeatureDescription: return "SpecificFeatureDescription";
        case Task::HistologicalTyping: return "HistologicalTyping";
        case Task::Grading: return "Grading";
        case Task::MolecularSubtyping: return "MolecularSubtyping";
        case Task::Staging: return "Staging";
        case Task::TreatmentRecommendations: return "TreatmentRecommendations";
        case Task::Prognosis: return "Prognosis";
        case Task::ReportGeneration: return "ReportGeneration";
    }
    return "?";
}

std::string_view to_string(QuestionType q) {
    return q == QuestionType::Open ? "Open" : "Closed";
}

std::optional<Capability> capability_from_string(std::string_view s) {
    for (Capability c : kAllCapabilities)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::optional<Task> task_from_string(std::string_view s) {
    for (Task t : kAllTasks)
        if (to_string(t) == s) return t;
    return std::nullopt;
}

std::optional<QuestionType> question_type_from_string(std::string_view s) {
    if (s == "Open") return QuestionType::Open;
    if (s == "Closed") return QuestionType::Closed;
    return std::nullopt;
}

double rubric_mean(const std::vector<RubricScore>& scores) {
    if (scores.empty()) throw std::invalid_argument("rubric_mean: empty input");
    long long sum = 0;
    for (const auto& s : scores) sum += s.tenths();
    return static_cast<double>(sum) / (10.0 * static_cast<double>(scores.size()));
}

}  // namespace wsieval
