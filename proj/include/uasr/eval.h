// uasr/eval.h

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

#ifndef UASR_EVAL_H_
#define UASR_EVAL_H_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uasr/corpus.h"

namespace uasr {

/// Training ids to scoring-class ids.  No merging of repeats.
PhonemeSequence map_classes(const PhonemeSequence &seq,
                            const PhonemeInventory &inv);

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_length = 0;

  std::size_t distance() const { return substitutions + deletions + insertions; }
  EditCounts &operator+=(const EditCounts &o);
};

/// Unit-cost Levenshtein alignment of hyp against ref.  Traceback prefers
/// substitution (or match), then deletion, then insertion.  When
/// confusions is non-null, each substitution (ref, hyp) is counted there.
EditCounts align_edits(const PhonemeSequence &hyp, const PhonemeSequence &ref,
                       std::map<std::pair<int, int>, std::size_t> *confusions =
                           nullptr);

struct PerResult {
  double per = 0.0;
  EditCounts counts;
};

/// Maps both sides, then (S + D + I) / len(ref).  Throws on an empty ref.
PerResult phone_error_rate(const PhonemeSequence &hyp, const PhonemeSequence &ref,
                           const PhonemeInventory &inv);

/// Pooled: total edits over total reference length.
PerResult corpus_phone_error_rate(const std::vector<PhonemeSequence> &hyp,
                                  const std::vector<PhonemeSequence> &ref,
                                  const PhonemeInventory &inv);

/// Fraction of frames whose mapped labels differ, pooled over utterances.
double frame_error_rate(const std::vector<std::vector<int>> &hyp_frames,
                        const std::vector<std::vector<int>> &ref_frames,
                        const PhonemeInventory &inv);

struct EvalReport {
  bool has_fer = false;
  double fer = 0.0;
  double per = 0.0;
  EditCounts counts;
  std::size_t num_utterances = 0;
  std::size_t num_frames = 0;
  int num_classes = 0;
  std::map<std::pair<int, int>, std::size_t> confusions;  // (ref, hyp)

  /// "metric<TAB>value" lines, then a "# confusions" section with the most
  /// frequent substitutions as "ref<TAB>hyp<TAB>count".
  std::string to_text(const PhonemeInventory &inv, std::size_t top = 20) const;
};

/// Frame labels are optional (pass empty vectors to skip FER).
EvalReport evaluate(const std::vector<PhonemeSequence> &hyp,
                    const std::vector<PhonemeSequence> &ref,
                    const std::vector<std::vector<int>> &hyp_frames,
                    const std::vector<std::vector<int>> &ref_frames,
                    const PhonemeInventory &inv);

}  // namespace uasr

#endif  // UASR_EVAL_H_
