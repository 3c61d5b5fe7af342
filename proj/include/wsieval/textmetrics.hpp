#pragma once
// Classical NLU metrics: BLEU-1..4, ROUGE-L and METEOR, plus the shared
// tokenizer. Pure functions, no global state.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace wsieval {

using TokenSeq = std::vector<std::string>;

// Lowercase; split on maximal runs of non-alphanumerics; digits kept.
TokenSeq tokenize(std::string_view text);

enum class BleuSmoothing { None, AddOne };

// Sentence BLEU: geometric mean of modified k-gram precisions for k=1..n
// times the brevity penalty. Effective reference length is the closest
// length, ties resolved toward the shorter reference. With smoothing None
// any zero precision zeroes the score; AddOne adds 1 to numerator and
// denominator for k >= 2 only.
double bleu_n(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int n,
              BleuSmoothing smoothing = BleuSmoothing::None);

// Accumulator for corpus-level BLEU (pooled counts and lengths).
class CorpusBleu {
public:
    explicit CorpusBleu(int max_n = 4) : max_n_(max_n), matched_(max_n, 0), total_(max_n, 0) {}

    void add(const TokenSeq& candidate, const std::vector<TokenSeq>& references);
    double score(int n, BleuSmoothing smoothing = BleuSmoothing::None) const;

private:
    int max_n_;
    std::vector<long long> matched_;
    std::vector<long long> total_;
    long long candidate_len_ = 0;
    long long reference_len_ = 0;
};

struct RougeL {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);
RougeL rouge_l(const TokenSeq& candidate, const TokenSeq& reference, double beta = 1.2);

struct MeteorParams {
    double alpha = 0.9;
    double beta = 3.0;
    double gamma = 0.5;
    // Above this many matches the chunk minimizer switches from exhaustive
    // search to a greedy left-to-right alignment.
    std::size_t exact_chunk_limit = 12;
};

// Matcher stages: exact token match, then suffix-stripped stem match.
// No synonym stage.
double meteor(const TokenSeq& candidate, const TokenSeq& reference,
              const MeteorParams& params = {});

// The stemmer used by METEOR's second stage (exposed for tests).
std::string light_stem(std::string_view token);

struct NluScores {
    double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
    double rouge_l_p = 0, rouge_l_r = 0, rouge_l_f = 0;
    double meteor = 0;
};

struct NluConfig {
    BleuSmoothing smoothing = BleuSmoothing::None;
    double rouge_beta = 1.2;
    MeteorParams meteor_params;
};

// Corpus BLEU pooled over pairs; ROUGE-L and METEOR averaged per pair.
// Input: (candidate, reference) text pairs.
NluScores nlu_suite(const std::vector<std::pair<std::string, std::string>>& pairs,
                    const NluConfig& config = {});

}  // namespace wsieval
