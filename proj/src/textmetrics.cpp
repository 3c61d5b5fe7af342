#include "wsieval/textmetrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>

namespace wsieval {

TokenSeq tokenize(std::string_view text) {
    TokenSeq tokens;
    std::string current;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

namespace {

// n-gram keyed by tokens joined with an unprintable separator.
std::map<std::string, long long> ngram_counts(const TokenSeq& seq, int n) {
    std::map<std::string, long long> counts;
    if (static_cast<int>(seq.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= seq.size(); ++i) {
        std::string key;
        for (int k = 0; k < n; ++k) {
            if (k) key.push_back('\x1f');
            key += seq[i + k];
        }
        ++counts[key];
    }
    return counts;
}

long long clipped_matches(const TokenSeq& candidate, const std::vector<TokenSeq>& references,
                          int n) {
    auto cand = ngram_counts(candidate, n);
    std::map<std::string, long long> max_ref;
    for (const auto& ref : references)
        for (const auto& [key, cnt] : ngram_counts(ref, n)) {
            auto& slot = max_ref[key];
            slot = std::max(slot, cnt);
        }
    long long matched = 0;
    for (const auto& [key, cnt] : cand) {
        auto it = max_ref.find(key);
        if (it != max_ref.end()) matched += std::min(cnt, it->second);
    }
    return matched;
}

// Closest reference length; ties resolved toward the shorter reference.
long long effective_ref_length(std::size_t candidate_len, const std::vector<TokenSeq>& references) {
    long long best = -1;
    for (const auto& ref : references) {
        long long len = static_cast<long long>(ref.size());
        if (best < 0) {
            best = len;
            continue;
        }
        long long c = static_cast<long long>(candidate_len);
        long long d_new = std::llabs(len - c), d_best = std::llabs(best - c);
        if (d_new < d_best || (d_new == d_best && len < best)) best = len;
    }
    return best;
}

double brevity_penalty(long long candidate_len, long long reference_len) {
    if (candidate_len == 0) return 0.0;
    if (candidate_len >= reference_len) return 1.0;
    return std::exp(1.0 - static_cast<double>(reference_len) / static_cast<double>(candidate_len));
}

double bleu_from_counts(const std::vector<long long>& matched, const std::vector<long long>& total,
                        long long candidate_len, long long reference_len, int n,
                        BleuSmoothing smoothing) {
    if (candidate_len == 0) return 0.0;
    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        double num = static_cast<double>(matched[k - 1]);
        double den = static_cast<double>(total[k - 1]);
        if (smoothing == BleuSmoothing::AddOne && k >= 2) {
            num += 1.0;
            den += 1.0;
        }
        if (num <= 0.0 || den <= 0.0) return 0.0;
        log_sum += std::log(num / den);
    }
    return brevity_penalty(candidate_len, reference_len) * std::exp(log_sum / n);
}

}  // namespace

double bleu_n(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int n,
              BleuSmoothing smoothing) {
    if (n < 1) throw std::invalid_argument("bleu_n: n must be >= 1");
    if (references.empty()) throw std::invalid_argument("bleu_n: no references");
    std::vector<long long> matched(n, 0), total(n, 0);
    for (int k = 1; k <= n; ++k) {
        matched[k - 1] = clipped_matches(candidate, references, k);
        long long t = static_cast<long long>(candidate.size()) - k + 1;
        total[k - 1] = std::max<long long>(t, 0);
    }
    return bleu_from_counts(matched, total, static_cast<long long>(candidate.size()),
                            effective_ref_length(candidate.size(), references), n, smoothing);
}

void CorpusBleu::add(const TokenSeq& candidate, const std::vector<TokenSeq>& references) {
    if (references.empty()) throw std::invalid_argument("CorpusBleu::add: no references");
    for (int k = 1; k <= max_n_; ++k) {
        matched_[k - 1] += clipped_matches(candidate, references, k);
        long long t = static_cast<long long>(candidate.size()) - k + 1;
        total_[k - 1] += std::max<long long>(t, 0);
    }
    candidate_len_ += static_cast<long long>(candidate.size());
    reference_len_ += effective_ref_length(candidate.size(), references);
}

double CorpusBleu::score(int n, BleuSmoothing smoothing) const {
    if (n < 1 || n > max_n_) throw std::invalid_argument("CorpusBleu::score: bad n");
    return bleu_from_counts(matched_, total_, candidate_len_, reference_len_, n, smoothing);
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeL rouge_l(const TokenSeq& candidate, const TokenSeq& reference, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("rouge_l: beta must be positive");
    RougeL out;
    double lcs = static_cast<double>(lcs_length(candidate, reference));
    out.precision = candidate.empty() ? 0.0 : lcs / static_cast<double>(candidate.size());
    out.recall = reference.empty() ? 0.0 : lcs / static_cast<double>(reference.size());
    double denom = out.recall + beta * beta * out.precision;
    out.f = denom > 0.0 ? (1.0 + beta * beta) * out.precision * out.recall / denom : 0.0;
    return out;
}

std::string light_stem(std::string_view token) {
    std::string t(token);
    auto ends_with = [&](std::string_view suf) {
        return t.size() > suf.size() && t.compare(t.size() - suf.size(), suf.size(), suf) == 0;
    };
    auto chop = [&](std::size_t n) { t.resize(t.size() - n); };
    if (ends_with("sses")) chop(2);
    else if (ends_with("ies")) chop(2);
    else if (ends_with("ss")) { /* keep */ }
    else if (ends_with("s")) chop(1);
    if (ends_with("eed")) chop(1);
    else if (ends_with("ing") && t.size() > 5) chop(3);
    else if (ends_with("ed") && t.size() > 4) chop(2);
    if (ends_with("ly") && t.size() > 4) chop(2);
    return t;
}

namespace {

struct Alignment {
    // ref position matched by each candidate position, or -1.
    std::vector<int> match;
    std::size_t matches = 0;
    std::size_t exact = 0;
};

std::size_t count_chunks(const std::vector<int>& match) {
    std::size_t chunks = 0;
    int prev_ref = -2;
    bool in_chunk = false;
    for (std::size_t i = 0; i < match.size(); ++i) {
        if (match[i] < 0) {
            in_chunk = false;
            prev_ref = -2;
            continue;
        }
        if (!in_chunk || match[i] != prev_ref + 1) ++chunks;
        in_chunk = true;
        prev_ref = match[i];
    }
    return chunks;
}

// compatibility: 2 = exact, 1 = stem, 0 = none
int compat(const std::string& a, const std::string& b, const std::string& sa,
           const std::string& sb) {
    if (a == b) return 2;
    if (sa == sb) return 1;
    return 0;
}

// Exact alignment by DP over (candidate position, used-reference bitmask).
// Objective, lexicographic: max exact matches, then max total matches, then
// min chunks. The last matched reference position rides along in the state
// so chunk continuation is visible.
struct DpVal {
    int exact = -1;
    int total = -1;
    int chunks = 0;
    bool better(const DpVal& o) const {
        if (exact != o.exact) return exact > o.exact;
        if (total != o.total) return total > o.total;
        return chunks < o.chunks;
    }
};

Alignment align_exact(const TokenSeq& cand, const TokenSeq& ref,
                      const std::vector<std::string>& cand_stem,
                      const std::vector<std::string>& ref_stem) {
    const std::size_t nc = cand.size(), nr = ref.size();
    const std::size_t nmask = std::size_t(1) << nr;
    // state: mask * (nr + 2) + (last_ref + 1); last_ref == nr+... we encode
    // last matched ref of the previous candidate position, or -1.
    auto idx = [&](std::size_t mask, int last) { return mask * (nr + 1) + std::size_t(last + 1); };
    std::vector<DpVal> cur(nmask * (nr + 1)), next;
    cur[idx(0, -1)] = {0, 0, 0};

    struct Back {
        std::vector<int> from_last;  // previous last for each state
        std::vector<std::size_t> from_mask;
        std::vector<int> took;  // ref chosen at this step (-1 = skip)
    };
    std::vector<Back> back(nc);

    for (std::size_t p = 0; p < nc; ++p) {
        next.assign(nmask * (nr + 1), DpVal{});
        back[p].from_last.assign(nmask * (nr + 1), -2);
        back[p].from_mask.assign(nmask * (nr + 1), 0);
        back[p].took.assign(nmask * (nr + 1), -1);
        for (std::size_t mask = 0; mask < nmask; ++mask) {
            for (int last = -1; last < static_cast<int>(nr); ++last) {
                const DpVal& v = cur[idx(mask, last)];
                if (v.exact < 0) continue;
                auto relax = [&](std::size_t nmask2, int nlast, DpVal nv, int took) {
                    DpVal& slot = next[idx(nmask2, nlast)];
                    if (nv.better(slot)) {
                        slot = nv;
                        back[p].from_last[idx(nmask2, nlast)] = last;
                        back[p].from_mask[idx(nmask2, nlast)] = mask;
                        back[p].took[idx(nmask2, nlast)] = took;
                    }
                };
                // skip candidate position p
                relax(mask, -1, v, -1);
                for (std::size_t q = 0; q < nr; ++q) {
                    if (mask & (std::size_t(1) << q)) continue;
                    int c = compat(cand[p], ref[q], cand_stem[p], ref_stem[q]);
                    if (!c) continue;
                    DpVal nv = v;
                    nv.total += 1;
                    if (c == 2) nv.exact += 1;
                    if (!(last >= 0 && last == static_cast<int>(q) - 1)) nv.chunks += 1;
                    relax(mask | (std::size_t(1) << q), static_cast<int>(q), nv, static_cast<int>(q));
                }
            }
        }
        std::swap(cur, next);
    }

    // pick the best terminal state
    DpVal best{-1, -1, 0};
    std::size_t best_mask = 0;
    int best_last = -1;
    for (std::size_t mask = 0; mask < nmask; ++mask)
        for (int last = -1; last < static_cast<int>(nr); ++last) {
            const DpVal& v = cur[idx(mask, last)];
            if (v.exact >= 0 && v.better(best)) {
                best = v;
                best_mask = mask;
                best_last = last;
            }
        }

    Alignment out;
    out.match.assign(nc, -1);
    std::size_t mask = best_mask;
    int last = best_last;
    for (std::size_t p = nc; p-- > 0;) {
        int took = back[p].took[idx(mask, last)];
        int flast = back[p].from_last[idx(mask, last)];
        std::size_t fmask = back[p].from_mask[idx(mask, last)];
        out.match[p] = took;
        if (took >= 0) {
            ++out.matches;
            if (cand[p] == ref[std::size_t(took)]) ++out.exact;
        }
        mask = fmask;
        last = flast;
    }
    return out;
}

// Greedy two-pass alignment for long inputs: exact stage then stem stage,
// each preferring the reference position that continues the current chunk.
Alignment align_greedy(const TokenSeq& cand, const TokenSeq& ref,
                       const std::vector<std::string>& cand_stem,
                       const std::vector<std::string>& ref_stem) {
    const std::size_t nc = cand.size(), nr = ref.size();
    Alignment out;
    out.match.assign(nc, -1);
    std::vector<bool> ref_used(nr, false);

    for (int stage = 2; stage >= 1; --stage) {
        int prev_ref = -2;
        for (std::size_t p = 0; p < nc; ++p) {
            if (out.match[p] >= 0) {
                prev_ref = out.match[p];
                continue;
            }
            int chosen = -1;
            // prefer chunk continuation
            int cont = prev_ref + 1;
            if (cont >= 0 && cont < static_cast<int>(nr) && !ref_used[std::size_t(cont)] &&
                compat(cand[p], ref[std::size_t(cont)], cand_stem[p], ref_stem[std::size_t(cont)]) >= stage) {
                chosen = cont;
            } else {
                for (std::size_t q = 0; q < nr; ++q) {
                    if (ref_used[q]) continue;
                    if (compat(cand[p], ref[q], cand_stem[p], ref_stem[q]) >= stage) {
                        chosen = static_cast<int>(q);
                        break;
                    }
                }
            }
            if (chosen >= 0) {
                out.match[p] = chosen;
                ref_used[std::size_t(chosen)] = true;
                ++out.matches;
                if (cand[p] == ref[std::size_t(chosen)]) ++out.exact;
            }
            prev_ref = out.match[p] >= 0 ? out.match[p] : -2;
        }
    }
    return out;
}

std::size_t max_possible_matches(const TokenSeq& cand, const TokenSeq& ref,
                                 const std::vector<std::string>& cand_stem,
                                 const std::vector<std::string>& ref_stem) {
    std::map<std::string, long long> c_stems, r_stems;
    for (const auto& s : cand_stem) ++c_stems[s];
    for (const auto& s : ref_stem) ++r_stems[s];
    long long m = 0;
    for (const auto& [s, cnt] : c_stems) {
        auto it = r_stems.find(s);
        if (it != r_stems.end()) m += std::min(cnt, it->second);
    }
    (void)cand;
    (void)ref;
    return static_cast<std::size_t>(m);
}

}  // namespace

double meteor(const TokenSeq& candidate, const TokenSeq& reference, const MeteorParams& params) {
    if (candidate.empty() || reference.empty()) return 0.0;
    std::vector<std::string> cand_stem, ref_stem;
    cand_stem.reserve(candidate.size());
    ref_stem.reserve(reference.size());
    for (const auto& t : candidate) cand_stem.push_back(light_stem(t));
    for (const auto& t : reference) ref_stem.push_back(light_stem(t));

    std::size_t upper = max_possible_matches(candidate, reference, cand_stem, ref_stem);
    Alignment align;
    if (upper <= params.exact_chunk_limit && reference.size() <= 12 && candidate.size() <= 24)
        align = align_exact(candidate, reference, cand_stem, ref_stem);
    else
        align = align_greedy(candidate, reference, cand_stem, ref_stem);

    std::size_t m = align.matches;
    if (m == 0) return 0.0;
    double p = static_cast<double>(m) / static_cast<double>(candidate.size());
    double r = static_cast<double>(m) / static_cast<double>(reference.size());
    double f_mean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
    std::size_t chunks = count_chunks(align.match);
    double penalty = params.gamma *
                     std::pow(static_cast<double>(chunks) / static_cast<double>(m), params.beta);
    return f_mean * (1.0 - penalty);
}

NluScores nlu_suite(const std::vector<std::pair<std::string, std::string>>& pairs,
                    const NluConfig& config) {
    if (pairs.empty()) throw std::invalid_argument("nlu_suite: empty input");
    CorpusBleu bleu(4);
    double rouge_p = 0, rouge_r = 0, rouge_f = 0, met = 0;
    for (const auto& [cand_text, ref_text] : pairs) {
        TokenSeq cand = tokenize(cand_text);
        TokenSeq ref = tokenize(ref_text);
        bleu.add(cand, {ref});
        RougeL r = rouge_l(cand, ref, config.rouge_beta);
        rouge_p += r.precision;
        rouge_r += r.recall;
        rouge_f += r.f;
        met += meteor(cand, ref, config.meteor_params);
    }
    double n = static_cast<double>(pairs.size());
    NluScores out;
    out.bleu1 = bleu.score(1, config.smoothing);
    out.bleu2 = bleu.score(2, config.smoothing);
    out.bleu3 = bleu.score(3, config.smoothing);
    out.bleu4 = bleu.score(4, config.smoothing);
    out.rouge_l_p = rouge_p / n;
    out.rouge_l_r = rouge_r / n;
    out.rouge_l_f = rouge_f / n;
    out.meteor = met / n;
    return out;
}

}  // namespace wsieval
