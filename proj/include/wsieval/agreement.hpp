#pragma once
// Reliability statistics: Pearson correlation, Cohen's kappa (pairwise and
// Fleiss variants), human annotation ingestion and the terminal annotation
// workflow.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wsieval/claimeval.hpp"
#include "wsieval/corpus.hpp"
#include "wsieval/types.hpp"

namespace wsieval {

struct HumanAnnotation {
    std::string pair_id;
    std::string rater_id;
    ClaimMetric metric = ClaimMetric::WsiPrecision;
    RubricScore score = *RubricScore::from_tenths(0);
    std::string timestamp;  // ISO 8601
};

struct StatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LengthMismatch : StatError {
    using StatError::StatError;
};
struct ZeroVariance : StatError {
    using StatError::StatError;
};
struct InsufficientRaters : StatError {
    using StatError::StatError;
};
struct NoOverlap : StatError {
    using StatError::StatError;
};

// Sample Pearson product-moment correlation.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Unweighted Cohen's kappa over nominal categories. Both raters constant and
// equal (p_e = 1 with p_o = 1) is defined as 1.
double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b);

// Linear-weighted variant (categories must be orderable scores in tenths).
double weighted_kappa_linear(const std::vector<int>& a, const std::vector<int>& b);

// Fleiss' kappa for >= 2 raters over the same items (categories in tenths).
double fleiss_kappa(const std::vector<std::vector<int>>& item_category_counts);

struct PairwiseKappa {
    std::string rater_a;
    std::string rater_b;
    double kappa = 0.0;
    std::size_t overlap = 0;
};

struct MeanKappaResult {
    double mean = 0.0;
    std::vector<PairwiseKappa> matrix;
    std::vector<std::pair<std::string, std::string>> skipped_pairs;  // no overlap
};

// Kappa per rater pair on their common (pair_id, metric) items; summary is
// the unweighted mean over pairs.
MeanKappaResult mean_pairwise_kappa(const std::vector<HumanAnnotation>& annotations);

struct AgreementReport {
    std::map<std::string, double> pearson_per_metric;   // metric name -> r
    std::map<std::string, std::size_t> sample_sizes;    // metric name -> n
    double mean_kappa = 0.0;
    std::vector<PairwiseKappa> kappa_matrix;
    std::map<std::string, double> mean_automated;  // metric name -> mean
    std::map<std::string, double> mean_human;
    std::map<std::string, std::map<std::string, double>> per_rater_pearson;  // metric -> rater -> r
};

// Pairs each automated value with the per-item mean human score and
// correlates per metric; also reports side-by-side means.
AgreementReport validate_metrics(const std::vector<MetricResult>& automated,
                                 const std::vector<HumanAnnotation>& human);

std::vector<HumanAnnotation> load_annotations(const std::filesystem::path& path);
void append_annotation(const std::filesystem::path& path, const HumanAnnotation& annotation);

// Terminal annotation session over `in`/`out` (scriptable). Presents each
// pair and asks for one rubric score per metric; invalid entries re-prompt;
// already-annotated pairs for this rater are skipped (resumable).
std::vector<HumanAnnotation> annotate(const std::vector<EvalPair>& pairs,
                                      const std::string& rater_id,
                                      const std::filesystem::path& annotation_file,
                                      std::istream& in, std::ostream& out);

}  // namespace wsieval
