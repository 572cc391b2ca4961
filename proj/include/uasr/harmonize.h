// uasr/harmonize.h

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

// Iterated GAN training, transcription, HMM training and realignment.

#ifndef UASR_HARMONIZE_H_
#define UASR_HARMONIZE_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uasr/corpus.h"
#include "uasr/decoder.h"
#include "uasr/gan.h"
#include "uasr/hmm.h"

namespace uasr {

/// Everything one run consumes.  Reference labels are optional; without
/// them FER/PER are not reported.
struct HarmonizeData {
  PhonemeInventory inventory;
  std::vector<Utterance> acoustic;  // normalized
  TextCorpus text;
  TextCorpus augmented;
  std::vector<Segmentation> initial_boundaries;
  std::vector<PhonemeSequence> ref_transcriptions;
  std::vector<std::vector<int>> ref_frames;

  bool has_reference() const { return !ref_transcriptions.empty(); }
  void validate() const;
};

struct HarmonizeConfig {
  int max_iterations = 5;
  /// Converged when fewer than this fraction of frame labels change.
  double threshold = 0.02;
  GanConfig gan;
  bool warm_start = false;
  int hmm_iterations = 10;
  int hmm_states = 3;
  double self_loop = 0.95;
  double floor_scale = 1e-3;
  int lm_order = 3;
  double lm_discount = 0.5;
  /// Decoding of generator posteriors (iterations >= 2).
  DecodeConfig posterior_decode{20.0, 60.0, 0.0};
  /// Decoding with the trained HMMs.
  DecodeConfig hmm_decode{1.0, 60.0, 0.0};
  uint64_t seed = 0;

  void validate() const;
};

struct IterationMetrics {
  int iteration = 0;
  bool has_reference = false;
  double fer = 0.0;      // GAN/HMM: aligned frame labels
  double per = 0.0;      // GAN/HMM: HMM decoding
  double gan_fer = 0.0;  // generator frame argmax
  double gan_per = 0.0;  // generator transcriptions
  double boundary_change = 0.0;
  double transcription_change = 0.0;
  std::size_t unalignable = 0;
  bool converged = false;
};

struct HarmonizeState {
  int iteration = 0;
  std::vector<Segmentation> boundaries;         // alignment of gan_transcriptions
  std::vector<PhonemeSequence> gan_transcriptions;
  std::vector<PhonemeSequence> transcriptions;  // HMM decoding
  std::vector<std::vector<int>> frame_labels;   // alignment of transcriptions
  Generator generator;
  HmmSet hmm;
  IterationMetrics metrics;
};

struct HarmonizeResult {
  std::vector<IterationMetrics> history;
  HarmonizeState final_state;
  bool converged = false;
};

/// Fraction of frames whose label differs.  Throws on mismatched shapes.
double label_change_rate(const std::vector<std::vector<int>> &prev,
                         const std::vector<std::vector<int>> &cur);

/// Fraction of frame transitions (t-1, t) whose boundary status differs.
double boundary_change_rate(const std::vector<Segmentation> &prev,
                            const std::vector<Segmentation> &cur);

/// True iff label_change_rate(prev, cur) < threshold.
bool convergence_check(const HarmonizeState &prev, const HarmonizeState &cur,
                       double threshold);

/// Runs up to max_iterations.  When run_dir is non-empty every finished
/// iteration is written to run_dir/iter_<k>/ and history.tsv is rewritten;
/// with resume set, finished iterations found there are loaded instead of
/// recomputed.  Per-iteration randomness derives from (seed, iteration), so
/// a resumed run matches an uninterrupted one.  progress, if set, receives
/// one line per finished stage.
HarmonizeResult harmonize_run(
    const HarmonizeData &data, const HarmonizeConfig &cfg,
    const std::string &run_dir = "", bool resume = false,
    const std::function<void(const std::string &)> &progress = {});

/// Tab-separated history with a header row.
std::string history_to_tsv(const std::vector<IterationMetrics> &history);

}  // namespace uasr

#endif  // UASR_HARMONIZE_H_
