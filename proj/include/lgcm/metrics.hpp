#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "lgcm/errors.hpp"

namespace lgcm {

struct EvalPair {
    std::vector<std::string> hypothesis;
    std::vector<std::string> reference; // single reference
};

/// Corpus-level BLEU-4: geometric mean of modified 1..4-gram precisions
/// times the brevity penalty, on a 0-100 scale. Orders with no hypothesis
/// n-grams anywhere in the corpus are dropped from the mean; a zero
/// precision at any remaining order gives 0 (no smoothing).
double bleu4(const std::vector<EvalPair>& corpus);

/// Mean of add-one-smoothed sentence BLEU-4 scores (diagnostic only).
double bleu4_sentence_smoothed(const std::vector<EvalPair>& corpus);

/// Corpus-level NIST up to 4-grams: information-weighted n-gram precision
/// with the NIST brevity factor, scaled by 100. Information weights come
/// from the reference side of the corpus.
double nist4(const std::vector<EvalPair>& corpus);

/// Reference-corpus information weights for orders 1..max_n, keyed by the
/// space-joined n-gram. Unigrams weigh log2(total/count); higher orders
/// weigh log2(count(prefix)/count(gram)).
std::unordered_map<std::string, double> nist_information_weights(
    const std::vector<EvalPair>& corpus, int max_n);

/// METEOR with exact and Porter-stem matching stages (no synonym lexicon):
/// the alignment maximizes matches and breaks ties toward fewest chunks;
/// F_mean uses alpha=0.9 and the fragmentation penalty 0.5*(chunks/m)^3.
/// 0-100 scale.
double meteor(const std::vector<EvalPair>& corpus, bool use_stems = true);

/// Matches and chunk count of the alignment for one pair.
std::pair<std::size_t, std::size_t> meteor_alignment(const std::vector<std::string>& hyp,
                                                     const std::vector<std::string>& ref,
                                                     bool use_stems);

/// Mean per-pair LCS F-measure (beta = 1.2 by default), 0-100 scale.
double rouge_l(const std::vector<EvalPair>& corpus, double beta = 1.2);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct MetricReport {
    double ppl = 0.0;
    double bleu4 = 0.0;
    double nist4 = 0.0;
    double meteor = 0.0;
    double rouge_l = 0.0;
};

MetricReport score_corpus(const std::vector<EvalPair>& corpus, double ppl);
std::string metric_report_text(const MetricReport& report);
std::string metric_report_csv(const MetricReport& report);

} // namespace lgcm
