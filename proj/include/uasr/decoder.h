// uasr/decoder.h

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

#ifndef UASR_DECODER_H_
#define UASR_DECODER_H_

#include <limits>

#include "uasr/corpus.h"
#include "uasr/hmm.h"
#include "uasr/ngram.h"

namespace uasr {

struct DecodeConfig {
  /// Multiplier on natural-log LM scores.
  double lm_weight = 1.0;
  /// Tokens scoring more than `beam` below the frame's best are dropped.
  /// Must be >= 1; +infinity disables pruning.
  double beam = 60.0;
  /// Added once per phoneme entered.
  double insertion_penalty = 0.0;

  void validate() const;
};

struct DecodeResult {
  PhonemeSequence phonemes;
  Segmentation segmentation;  // one segment per decoded phoneme
  double score = -std::numeric_limits<double>::infinity();
};

/// Token passing over (LM history, phoneme, state).  A path's score is
///
///   sum_t emission(t, state_t) + sum_t log a(state_{t-1} -> state_t)
///   + lm_weight * (sum_i log P(p_i | history) + log P(</s> | history))
///   + insertion_penalty * (number of phonemes)
///
/// and every path must end in the last state of a phoneme.  Throws
/// NumericError when no complete path survives.
DecodeResult decode_viterbi_lm_scores(const HmmTopology &topo,
                                      const Tensor2 &emissions,
                                      const NGramLm &lm,
                                      const DecodeConfig &cfg);

PhonemeSequence decode_viterbi_lm(const HmmSet &hmm, const NGramLm &lm,
                                  const Utterance &u, const DecodeConfig &cfg);

}  // namespace uasr

#endif  // UASR_DECODER_H_
