#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "wsieval/types.hpp"

using namespace wsieval;

TEST_CASE("taxonomy maps every task to its capability") {
    CHECK(capability_of(Task::GlobalMorphologyDescription) == Capability::MorphologicalAnalysis);
    CHECK(capability_of(Task::KeyDiagnosticDescription) == Capability::MorphologicalAnalysis);
    CHECK(capability_of(Task::RegionalStructureDescription) == Capability::MorphologicalAnalysis);
    CHECK(capability_of(Task::SpecificFeatureDescription) == Capability::MorphologicalAnalysis);
    CHECK(capability_of(Task::HistologicalTyping) == Capability::Diagnosis);
    CHECK(capability_of(Task::Grading) == Capability::Diagnosis);
    CHECK(capability_of(Task::MolecularSubtyping) == Capability::Diagnosis);
    CHECK(capability_of(Task::Staging) == Capability::Diagnosis);
    CHECK(capability_of(Task::TreatmentRecommendations) == Capability::TreatmentPlanning);
    CHECK(capability_of(Task::Prognosis) == Capability::TreatmentPlanning);
    CHECK(capability_of(Task::ReportGeneration) == Capability::ReportGeneration);
}

TEST_CASE("string round-trips for all enums") {
    for (Capability c : kAllCapabilities) CHECK(capability_from_string(to_string(c)) == c);
    for (Task t : kAllTasks) CHECK(task_from_string(to_string(t)) == t);
    CHECK(question_type_from_string("Open") == QuestionType::Open);
    CHECK(question_type_from_string("Closed") == QuestionType::Closed);
    CHECK_FALSE(capability_from_string("Nope").has_value());
    CHECK_FALSE(task_from_string("").has_value());
}

TEST_CASE("rubric scores accept only the four-point set") {
    CHECK(RubricScore::from_double(0.0)->tenths() == 0);
    CHECK(RubricScore::from_double(0.3)->tenths() == 3);
    CHECK(RubricScore::from_double(0.7)->tenths() == 7);
    CHECK(RubricScore::from_double(1.0)->tenths() == 10);
    CHECK_FALSE(RubricScore::from_double(0.5).has_value());
    CHECK_FALSE(RubricScore::from_double(0.69).has_value());
    CHECK_FALSE(RubricScore::from_double(-0.3).has_value());
    CHECK_FALSE(RubricScore::from_tenths(5).has_value());
    CHECK(RubricScore::from_tenths(7)->value() == doctest::Approx(0.7));
}

TEST_CASE("rubric_mean is exact on random multisets") {
    std::mt19937_64 rng(42);
    const int kTenths[4] = {0, 3, 7, 10};
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng() % 40;
        std::vector<RubricScore> scores;
        std::vector<int> tenths;
        for (std::size_t i = 0; i < n; ++i) {
            int t = kTenths[rng() % 4];
            tenths.push_back(t);
            scores.push_back(*RubricScore::from_tenths(t));
        }
        double mean = rubric_mean(scores);
        CHECK(mean == oracles::oracle_rubric_mean(tenths));
        CHECK(mean >= 0.0);
        CHECK(mean <= 1.0);
    }
}

TEST_CASE("rubric_mean hits the known exact values") {
    auto mk = [](std::initializer_list<int> ts) {
        std::vector<RubricScore> v;
        for (int t : ts) v.push_back(*RubricScore::from_tenths(t));
        return v;
    };
    CHECK(rubric_mean(mk({10, 7, 10, 10, 10, 0, 7, 10})) == 0.8);  // 64/80
    CHECK(rubric_mean(mk({3, 3, 3})) == 0.3);
    CHECK(rubric_mean(mk({0})) == 0.0);
    CHECK(rubric_mean(mk({10, 10})) == 1.0);
    CHECK_THROWS_AS(rubric_mean({}), std::invalid_argument);
}
