#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "imtex/common.hpp"

namespace imtex {

/// Aggregated n-gram counts for Google BLEU. `match_count` is the sum over
/// n = 1..max_n of clipped matches min(count_hyp(g), count_ref(g));
/// `hyp_ngrams` / `ref_ngrams` are the corresponding totals.
struct GleuStats {
  std::int64_t match_count = 0;
  std::int64_t hyp_ngrams = 0;
  std::int64_t ref_ngrams = 0;

  GleuStats& operator+=(const GleuStats& o) {
    match_count += o.match_count;
    hyp_ngrams += o.hyp_ngrams;
    ref_ngrams += o.ref_ngrams;
    return *this;
  }

  /// min(precision, recall) on the aggregated counts.
  /// Both sides empty scores 1; one side empty scores 0.
  double score() const {
    if (hyp_ngrams == 0 && ref_ngrams == 0) return 1.0;
    if (hyp_ngrams == 0 || ref_ngrams == 0) return 0.0;
    const double precision =
        static_cast<double>(match_count) / static_cast<double>(hyp_ngrams);
    const double recall =
        static_cast<double>(match_count) / static_cast<double>(ref_ngrams);
    return std::min(precision, recall);
  }
};

using TokenList = std::vector<std::string>;

/// Whitespace tokenization used for all metric computation. Scores are
/// computed over detokenized LaTeX split on runs of spaces/tabs, which keeps
/// them comparable across models with different subword vocabularies.
inline TokenList split_tokens(const std::string& text) {
  TokenList out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' ||
                               text[i] == '\n' || text[i] == '\r'))
      ++i;
    std::size_t start = i;
    while (i < text.size() && text[i] != ' ' && text[i] != '\t' &&
           text[i] != '\n' && text[i] != '\r')
      ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

namespace detail {

// n-grams keyed by tokens joined on US (0x1f), which cannot appear in
// whitespace-split tokens.
inline void count_ngrams(const TokenList& tokens, int n,
                         std::unordered_map<std::string, int>& counts) {
  if (static_cast<int>(tokens.size()) < n) return;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key.push_back('\x1f');
      key += tokens[i + j];
    }
    ++counts[key];
  }
}

}  // namespace detail

/// Clipped n-gram statistics for one hypothesis/reference pair over
/// n = 1..max_n.
inline GleuStats gleu_stats(const TokenList& hyp, const TokenList& ref,
                            int max_n = 4) {
  if (max_n < 0) throw UsageError("gleu: max_n must be non-negative");
  GleuStats stats;
  for (int n = 1; n <= max_n; ++n) {
    const std::int64_t hyp_n =
        static_cast<int>(hyp.size()) >= n
            ? static_cast<std::int64_t>(hyp.size()) - n + 1
            : 0;
    const std::int64_t ref_n =
        static_cast<int>(ref.size()) >= n
            ? static_cast<std::int64_t>(ref.size()) - n + 1
            : 0;
    stats.hyp_ngrams += hyp_n;
    stats.ref_ngrams += ref_n;
    if (hyp_n == 0 || ref_n == 0) continue;
    std::unordered_map<std::string, int> hyp_counts, ref_counts;
    detail::count_ngrams(hyp, n, hyp_counts);
    detail::count_ngrams(ref, n, ref_counts);
    for (const auto& [gram, c] : hyp_counts) {
      auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) stats.match_count += std::min(c, it->second);
    }
  }
  return stats;
}

/// Sentence-level Google BLEU: min(n-gram precision, n-gram recall) with
/// clipped matches, n = 1..max_n.
inline double gleu_sentence(const TokenList& hyp, const TokenList& ref,
                            int max_n = 4) {
  if (hyp.empty() && ref.empty()) return 1.0;
  if (hyp.empty() || ref.empty()) return 0.0;
  return gleu_stats(hyp, ref, max_n).score();
}

/// Corpus-level Google BLEU: micro-average — statistics are aggregated over
/// all pairs first, then min(precision, recall) is taken on the totals.
inline double gleu_corpus(
    const std::vector<std::pair<TokenList, TokenList>>& pairs, int max_n = 4) {
  if (pairs.empty()) throw DataError("gleu_corpus: empty pair list");
  GleuStats total;
  for (const auto& [hyp, ref] : pairs) total += gleu_stats(hyp, ref, max_n);
  return total.score();
}

}  // namespace imtex
