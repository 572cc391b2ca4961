// uasr/hmm.h

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

// Monophone left-to-right HMMs with diagonal Gaussian emissions, flat start
// and Viterbi training.

#ifndef UASR_HMM_H_
#define UASR_HMM_H_

#include <cmath>
#include <string>
#include <vector>

#include "uasr/corpus.h"
#include "uasr/tensor.h"

namespace uasr {

/// Shared transition structure: every phoneme is a chain of
/// states_per_phoneme emitting states; each state loops with probability
/// self_loop and otherwise advances (the last state advances into the next
/// phoneme).
struct HmmTopology {
  int num_phonemes = 0;
  int states_per_phoneme = 3;
  double self_loop = 0.95;

  int num_states() const { return num_phonemes * states_per_phoneme; }
  int state_index(int phoneme, int state) const {
    return phoneme * states_per_phoneme + state;
  }
  double log_self() const { return std::log(self_loop); }
  double log_advance() const { return std::log(1.0 - self_loop); }
  void validate() const;
};

struct HmmSet {
  HmmTopology topology;
  Tensor2 means;       // num_states x d
  Tensor2 variances;   // num_states x d
  std::vector<double> variance_floor;  // d

  std::size_t dim() const { return means.cols(); }

  /// T x num_states matrix of log N(x_t; mean_j, diag(var_j)).
  Tensor2 log_likelihoods(const Utterance &u) const;

  /// Text form: "hmm M n_states d self_loop", "floor v1..vd", then one line
  /// per state "state p s mean m1..md var v1..vd".
  std::string to_text() const;
  static HmmSet from_text(const std::string &text);

  friend bool operator==(const HmmSet &a, const HmmSet &b) {
    return a.topology.num_phonemes == b.topology.num_phonemes &&
           a.topology.states_per_phoneme == b.topology.states_per_phoneme &&
           a.topology.self_loop == b.topology.self_loop && a.means == b.means &&
           a.variances == b.variances && a.variance_floor == b.variance_floor;
  }
};

struct HmmOptions {
  int num_phonemes = 0;
  int states_per_phoneme = 3;
  double self_loop = 0.95;
  /// Variance floor as a fraction of the global per-dimension variance.
  double floor_scale = 1e-3;
};

/// Per-frame state assignment for one utterance.
struct Alignment {
  std::vector<int> phonemes;   // phoneme id per frame
  std::vector<int> states;     // state within the phoneme, per frame
  std::vector<int> positions;  // index into the transcription, per frame
  Segmentation segmentation;   // one segment per transcription position
  double log_likelihood = 0.0;
};

/// Exact Viterbi through the transcription's expanded state chain.  Path
/// score = sum of emissions plus log transition probabilities between
/// consecutive frames.  Throws NumericError("unalignable ...") when the
/// transcription needs more frames than T.
Alignment viterbi_align_scores(const HmmTopology &topo, const Tensor2 &emissions,
                               const PhonemeSequence &transcription);

Alignment viterbi_align(const HmmSet &hmm, const Utterance &u,
                        const PhonemeSequence &transcription);

/// True when transcription.size() * states_per_phoneme <= T.
bool alignable(const HmmTopology &topo, std::size_t num_frames,
               const PhonemeSequence &transcription);

struct FlatStartReport {
  std::vector<int> unseen_phonemes;
};

/// Uniform segmentation of each utterance over its transcription (and of
/// each occurrence over its states); each state's Gaussian is fit to the
/// frames it receives, pooled over the corpus.  States that receive no
/// frames fall back to their phoneme's statistics, then to global ones.
HmmSet flat_start(const std::vector<Utterance> &utts,
                  const std::vector<PhonemeSequence> &transcriptions,
                  const HmmOptions &opts, FlatStartReport *report = nullptr);

/// Re-fits each state's Gaussian to its aligned frames, accumulated in
/// utterance order.  States without frames keep their parameters.
HmmSet reestimate(const HmmSet &hmm, const std::vector<Utterance> &utts,
                  const std::vector<Alignment> &alignments);

struct HmmTrainTrace {
  /// Total alignment log-likelihood of the corpus under the model after
  /// 0, 1, ..., n_iters re-estimations.
  std::vector<double> total_log_likelihood;
  FlatStartReport flat_start;
};

/// flat_start, then n_iters rounds of (align all, reestimate).
HmmSet train_hmm(const std::vector<Utterance> &utts,
                 const std::vector<PhonemeSequence> &transcriptions,
                 const HmmOptions &opts, int n_iters,
                 HmmTrainTrace *trace = nullptr);

}  // namespace uasr

#endif  // UASR_HMM_H_
