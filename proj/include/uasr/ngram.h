// uasr/ngram.h

// Copyright 2026  The uasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef UASR_NGRAM_H_
#define UASR_NGRAM_H_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "uasr/corpus.h"

namespace uasr {

/// Phoneme n-gram model with interpolated absolute discounting:
///
///   P(w | h) = max(c(h w) - D, 0) / c(h) + D * N1+(h .) / c(h) * P(w | h')
///
/// where h' drops the oldest token of h.  Histories never seen as a context
/// back off with weight 1.  The unigram level interpolates with a uniform
/// distribution over the predicted vocabulary (phonemes plus </s>).
///
/// Token ids: phonemes 0..M-1, end marker M, start marker M+1.  The start
/// marker only ever appears in histories.
class NGramLm {
 public:
  NGramLm() = default;

  int order() const { return order_; }
  int num_phonemes() const { return num_phonemes_; }
  double discount() const { return discount_; }
  int end_token() const { return num_phonemes_; }
  int start_token() const { return num_phonemes_ + 1; }
  /// Size of the predicted vocabulary (phonemes and </s>).
  int vocab_size() const { return num_phonemes_ + 1; }

  /// Natural-log probability of `token` after `history` (oldest first).
  /// Only the last order-1 history tokens are used.
  double log_prob(std::span<const int> history, int token) const;
  double prob(std::span<const int> history, int token) const;

  /// Histories observed as contexts, for normalization checks.
  std::vector<std::vector<int>> contexts() const;

  /// Total natural-log probability of a sequence, including </s>.
  double sequence_log_prob(const PhonemeSequence &seq) const;

  /// Text form, one line per stored n-gram, sorted:
  ///   "history<TAB>symbol<TAB>logprob<TAB>backoff"
  /// history is space-separated symbols ("-" when empty); logprob is the
  /// natural log of P(symbol | history); backoff is the natural log of the
  /// backoff weight of the context (history symbol), 0 when that context is
  /// unseen.  Header line: "ngram<TAB>order<TAB>M<TAB>discount".
  std::string to_text(const PhonemeInventory &inv) const;
  static NGramLm from_text(const std::string &text, const PhonemeInventory &inv);

  friend NGramLm train_ngram_lm(const TextCorpus &text, int num_phonemes,
                                int order, double discount);

 private:
  struct Context {
    std::map<int, double> log_probs;  // seen successors
    double log_backoff = 0.0;
  };

  int order_ = 0;
  int num_phonemes_ = 0;
  double discount_ = 0.5;
  // Keyed by the history token sequence; the empty key holds unigrams.
  std::map<std::vector<int>, Context> contexts_;
};

/// Counts n-grams with <s> ... </s> added per sequence.  order >= 1.
NGramLm train_ngram_lm(const TextCorpus &text, int num_phonemes, int order,
                       double discount = 0.5);

}  // namespace uasr

#endif  // UASR_NGRAM_H_
