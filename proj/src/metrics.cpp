#include "lgcm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lgcm/stemmer.hpp"

namespace lgcm {

namespace {

std::string join_gram(const std::vector<std::string>& toks, std::size_t start, std::size_t n) {
    std::string out = toks[start];
    for (std::size_t i = 1; i < n; ++i) {
        out.push_back(' ');
        out += toks[start + i];
    }
    return out;
}

std::unordered_map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& toks,
                                                          std::size_t n) {
    std::unordered_map<std::string, std::size_t> counts;
    if (toks.size() >= n)
        for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[join_gram(toks, i, n)];
    return counts;
}

} // namespace

double bleu4(const std::vector<EvalPair>& corpus) {
    if (corpus.empty()) throw DataError("bleu4: empty corpus");
    constexpr int kMaxN = 4;
    std::size_t matched[kMaxN] = {0, 0, 0, 0};
    std::size_t total[kMaxN] = {0, 0, 0, 0};
    std::size_t hyp_len = 0, ref_len = 0;
    for (const auto& pair : corpus) {
        hyp_len += pair.hypothesis.size();
        ref_len += pair.reference.size();
        for (int n = 1; n <= kMaxN; ++n) {
            auto hyp = ngram_counts(pair.hypothesis, n);
            auto ref = ngram_counts(pair.reference, n);
            for (const auto& [gram, count] : hyp) {
                total[n - 1] += count;
                auto it = ref.find(gram);
                if (it != ref.end()) matched[n - 1] += std::min(count, it->second);
            }
        }
    }
    double log_sum = 0.0;
    int orders = 0;
    for (int n = 0; n < kMaxN; ++n) {
        if (total[n] == 0) continue; // order unrepresented in the hypotheses
        if (matched[n] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
        ++orders;
    }
    if (orders == 0) return 0.0;
    const double bp = hyp_len >= ref_len
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref_len) /
                                               static_cast<double>(hyp_len));
    return 100.0 * bp * std::exp(log_sum / orders);
}

double bleu4_sentence_smoothed(const std::vector<EvalPair>& corpus) {
    if (corpus.empty()) throw DataError("bleu4: empty corpus");
    double sum = 0.0;
    for (const auto& pair : corpus) {
        double log_sum = 0.0;
        bool scorable = !pair.hypothesis.empty();
        for (int n = 1; n <= 4 && scorable; ++n) {
            auto hyp = ngram_counts(pair.hypothesis, n);
            auto ref = ngram_counts(pair.reference, n);
            std::size_t matched = 0, total = 0;
            for (const auto& [gram, count] : hyp) {
                total += count;
                auto it = ref.find(gram);
                if (it != ref.end()) matched += std::min(count, it->second);
            }
            // add-one smoothing above unigrams
            const double num = n == 1 ? static_cast<double>(matched)
                                      : static_cast<double>(matched) + 1.0;
            const double den = n == 1 ? static_cast<double>(total)
                                      : static_cast<double>(total) + 1.0;
            if (den == 0.0 || num == 0.0) {
                scorable = false;
                break;
            }
            log_sum += std::log(num / den) / 4.0;
        }
        if (!scorable) continue;
        const double bp =
            pair.hypothesis.size() >= pair.reference.size()
                ? 1.0
                : std::exp(1.0 - static_cast<double>(pair.reference.size()) /
                                     static_cast<double>(pair.hypothesis.size()));
        sum += 100.0 * bp * std::exp(log_sum);
    }
    return sum / static_cast<double>(corpus.size());
}

std::unordered_map<std::string, double> nist_information_weights(
    const std::vector<EvalPair>& corpus, int max_n) {
    std::vector<std::unordered_map<std::string, std::size_t>> counts(max_n + 1);
    std::size_t total_unigrams = 0;
    for (const auto& pair : corpus) {
        total_unigrams += pair.reference.size();
        for (int n = 1; n <= max_n; ++n)
            for (const auto& [gram, c] : ngram_counts(pair.reference, n)) counts[n][gram] += c;
    }
    std::unordered_map<std::string, double> info;
    for (int n = 1; n <= max_n; ++n) {
        for (const auto& [gram, c] : counts[n]) {
            double numerator;
            if (n == 1) {
                numerator = static_cast<double>(total_unigrams);
            } else {
                const auto prefix = gram.substr(0, gram.rfind(' '));
                numerator = static_cast<double>(counts[n - 1][prefix]);
            }
            info[gram] = std::log2(numerator / static_cast<double>(c));
        }
    }
    return info;
}

double nist4(const std::vector<EvalPair>& corpus) {
    if (corpus.empty()) throw DataError("nist4: empty corpus");
    constexpr int kMaxN = 4;
    auto info = nist_information_weights(corpus, kMaxN);

    double score = 0.0;
    std::size_t hyp_len = 0, ref_len = 0;
    double gained[kMaxN] = {0, 0, 0, 0};
    std::size_t total[kMaxN] = {0, 0, 0, 0};
    for (const auto& pair : corpus) {
        hyp_len += pair.hypothesis.size();
        ref_len += pair.reference.size();
        for (int n = 1; n <= kMaxN; ++n) {
            auto hyp = ngram_counts(pair.hypothesis, n);
            auto ref = ngram_counts(pair.reference, n);
            for (const auto& [gram, count] : hyp) {
                total[n - 1] += count;
                auto it = ref.find(gram);
                if (it == ref.end()) continue;
                const std::size_t used = std::min(count, it->second);
                gained[n - 1] += static_cast<double>(used) * info[gram];
            }
        }
    }
    for (int n = 0; n < kMaxN; ++n)
        if (total[n] > 0) score += gained[n] / static_cast<double>(total[n]);

    if (hyp_len == 0) return 0.0;
    // brevity factor: exp(beta * ln^2(min(Lhyp/Lref, 1))), with beta chosen
    // so the factor is 1/2 at a 2/3 length ratio
    const double beta = std::log(0.5) / std::pow(std::log(2.0 / 3.0), 2.0);
    const double ratio =
        std::min(1.0, static_cast<double>(hyp_len) / static_cast<double>(ref_len));
    const double brevity = std::exp(beta * std::pow(std::log(ratio), 2.0));
    return 100.0 * score * brevity;
}

namespace {

struct AlignKey {
    std::size_t i;
    std::uint32_t mask;
    int prev;
    bool operator==(const AlignKey& o) const {
        return i == o.i && mask == o.mask && prev == o.prev;
    }
};

struct AlignKeyHash {
    std::size_t operator()(const AlignKey& k) const {
        return std::hash<std::uint64_t>()((static_cast<std::uint64_t>(k.i) << 40) ^
                                          (static_cast<std::uint64_t>(k.mask) << 8) ^
                                          static_cast<std::uint64_t>(k.prev + 1));
    }
};

// (matches, chunks); better = more matches, then fewer chunks
using AlignValue = std::pair<std::size_t, std::size_t>;

bool better(const AlignValue& a, const AlignValue& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
}

struct SearchBudgetExceeded {};

struct Aligner {
    const std::vector<std::vector<std::size_t>>& candidates; // per hyp pos, matching ref pos
    std::size_t hyp_len;
    std::unordered_map<AlignKey, AlignValue, AlignKeyHash> memo;
    std::size_t nodes = 0;
    static constexpr std::size_t kNodeBudget = 200000;

    // prev: ref index matched at hyp position i-1, or -1 when i-1 is unmatched
    AlignValue solve(std::size_t i, std::uint32_t mask, int prev) {
        if (i == hyp_len) return {0, 0};
        if (++nodes > kNodeBudget) throw SearchBudgetExceeded{};
        const AlignKey key{i, mask, prev};
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        AlignValue best = solve(i + 1, mask, -1); // leave position i unmatched
        for (std::size_t j : candidates[i]) {
            if (mask & (1u << j)) continue;
            AlignValue sub = solve(i + 1, mask | (1u << j), static_cast<int>(j));
            ++sub.first;
            if (prev < 0 || static_cast<std::size_t>(prev) + 1 != j) ++sub.second; // new chunk
            if (better(sub, best)) best = sub;
        }
        memo.emplace(key, best);
        return best;
    }
};

std::vector<std::string> stems_of(const std::vector<std::string>& words) {
    std::vector<std::string> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(porter_stem(w));
    return out;
}

} // namespace

std::pair<std::size_t, std::size_t> meteor_alignment(const std::vector<std::string>& hyp,
                                                     const std::vector<std::string>& ref,
                                                     bool use_stems) {
    std::vector<std::string> hyp_stems = use_stems ? stems_of(hyp) : std::vector<std::string>{};
    std::vector<std::string> ref_stems = use_stems ? stems_of(ref) : std::vector<std::string>{};
    auto matches_at = [&](std::size_t i, std::size_t j) {
        if (hyp[i] == ref[j]) return true;
        return use_stems && hyp_stems[i] == ref_stems[j];
    };

    if (ref.size() <= 30) {
        std::vector<std::vector<std::size_t>> candidates(hyp.size());
        for (std::size_t i = 0; i < hyp.size(); ++i)
            for (std::size_t j = 0; j < ref.size(); ++j)
                if (matches_at(i, j)) candidates[i].push_back(j);
        Aligner aligner{candidates, hyp.size(), {}, 0};
        try {
            return aligner.solve(0, 0, -1);
        } catch (const SearchBudgetExceeded&) {
            // fall through to the greedy alignment
        }
    }

    // long references or heavily ambiguous pairs: greedy left-to-right
    std::vector<bool> used(ref.size(), false);
    std::size_t matches = 0, chunks = 0;
    int prev = -1;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        bool found = false;
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (used[j] || !matches_at(i, j)) continue;
            used[j] = true;
            ++matches;
            if (prev < 0 || static_cast<std::size_t>(prev) + 1 != j) ++chunks;
            prev = static_cast<int>(j);
            found = true;
            break;
        }
        if (!found) prev = -1;
    }
    return {matches, chunks};
}

double meteor(const std::vector<EvalPair>& corpus, bool use_stems) {
    if (corpus.empty()) throw DataError("meteor: empty corpus");
    constexpr double kAlpha = 0.9;
    constexpr double kBeta = 3.0;
    constexpr double kGamma = 0.5;
    std::size_t matches = 0, chunks = 0, hyp_len = 0, ref_len = 0;
    for (const auto& pair : corpus) {
        hyp_len += pair.hypothesis.size();
        ref_len += pair.reference.size();
        auto [m, ch] = meteor_alignment(pair.hypothesis, pair.reference, use_stems);
        matches += m;
        chunks += ch;
    }
    if (matches == 0 || hyp_len == 0 || ref_len == 0) return 0.0;
    const double precision = static_cast<double>(matches) / static_cast<double>(hyp_len);
    const double recall = static_cast<double>(matches) / static_cast<double>(ref_len);
    const double f_mean =
        precision * recall / (kAlpha * precision + (1.0 - kAlpha) * recall);
    const double penalty =
        kGamma * std::pow(static_cast<double>(chunks) / static_cast<double>(matches), kBeta);
    return 100.0 * f_mean * (1.0 - penalty);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const std::vector<EvalPair>& corpus, double beta) {
    if (corpus.empty()) throw DataError("rouge_l: empty corpus");
    double sum = 0.0;
    for (const auto& pair : corpus) {
        if (pair.hypothesis.empty() || pair.reference.empty()) continue;
        const double lcs = static_cast<double>(lcs_length(pair.hypothesis, pair.reference));
        if (lcs == 0.0) continue;
        const double p = lcs / static_cast<double>(pair.hypothesis.size());
        const double r = lcs / static_cast<double>(pair.reference.size());
        sum += (1.0 + beta * beta) * r * p / (r + beta * beta * p);
    }
    return 100.0 * sum / static_cast<double>(corpus.size());
}

MetricReport score_corpus(const std::vector<EvalPair>& corpus, double ppl) {
    MetricReport r;
    r.ppl = ppl;
    r.bleu4 = bleu4(corpus);
    r.nist4 = nist4(corpus);
    r.meteor = meteor(corpus);
    r.rouge_l = rouge_l(corpus);
    return r;
}

std::string metric_report_text(const MetricReport& r) {
    std::ostringstream out;
    out << "# meteor uses exact + stem matching only (no synonym lexicon)\n";
    out << "ppl     " << r.ppl << "\n";
    out << "bleu4   " << r.bleu4 << "\n";
    out << "nist4   " << r.nist4 << "\n";
    out << "meteor  " << r.meteor << "\n";
    out << "rouge_l " << r.rouge_l << "\n";
    return out.str();
}

std::string metric_report_csv(const MetricReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << "# meteor uses exact + stem matching only (no synonym lexicon)\n";
    out << "ppl,bleu4,nist4,meteor,rouge_l\n";
    out << r.ppl << ',' << r.bleu4 << ',' << r.nist4 << ',' << r.meteor << ',' << r.rouge_l
        << '\n';
    return out.str();
}

} // namespace lgcm
