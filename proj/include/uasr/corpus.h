// uasr/corpus.h

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

#ifndef UASR_CORPUS_H_
#define UASR_CORPUS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uasr/tensor.h"

namespace uasr {

/// Phoneme ids index into a PhonemeInventory.
using PhonemeSequence = std::vector<int>;

/// Ordered set of M training symbols, with an optional many-to-one map onto
/// a coarser scoring inventory.
class PhonemeInventory {
 public:
  PhonemeInventory() = default;
  explicit PhonemeInventory(std::vector<std::string> symbols);

  int size() const { return static_cast<int>(symbols_.size()); }
  const std::string &symbol(int id) const { return symbols_.at(id); }
  const std::vector<std::string> &symbols() const { return symbols_; }
  /// Throws ParseError on an unknown symbol.
  int id(const std::string &symbol) const;
  bool contains(const std::string &symbol) const {
    return index_.count(symbol) != 0;
  }

  /// Installs the scoring map.  Every training symbol must be mapped.
  void set_eval_map(const std::map<std::string, std::string> &map);
  bool has_eval_map() const { return !score_ids_.empty(); }
  /// Scoring-class id of a training id; identity when no map is present.
  int score_id(int id) const;
  int score_size() const;
  const std::string &score_symbol(int score_id) const;

  PhonemeSequence encode(const std::vector<std::string> &symbols) const;
  std::vector<std::string> decode(const PhonemeSequence &seq) const;

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, int> index_;
  std::vector<int> score_ids_;
  std::vector<std::string> score_symbols_;
};

/// One utterance: T frames of d-dimensional features.
struct Utterance {
  std::string id;
  Tensor2 features;

  std::size_t num_frames() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  /// Throws if T < 1, d < 1 or any value is non-finite.
  void validate() const;
};

/// Ordered partition of frames [0, T) into contiguous non-empty segments.
/// Stored as the start frames of segments 2..L ("cuts"); a cut c is the
/// boundary after 1-based frame c.
class Segmentation {
 public:
  Segmentation() = default;
  Segmentation(std::size_t num_frames, std::vector<std::size_t> cuts);
  static Segmentation from_lengths(const std::vector<std::size_t> &lengths);
  static Segmentation single(std::size_t num_frames) { return {num_frames, {}}; }

  std::size_t num_frames() const { return num_frames_; }
  std::size_t num_segments() const { return cuts_.size() + 1; }
  const std::vector<std::size_t> &cuts() const { return cuts_; }
  std::size_t begin(std::size_t l) const { return l == 0 ? 0 : cuts_[l - 1]; }
  std::size_t end(std::size_t l) const {
    return l == cuts_.size() ? num_frames_ : cuts_[l];
  }
  std::size_t length(std::size_t l) const { return end(l) - begin(l); }
  std::vector<std::size_t> lengths() const;
  /// Segment index owning each frame.
  std::vector<std::size_t> frame_owner() const;

  friend bool operator==(const Segmentation &, const Segmentation &) = default;

 private:
  std::size_t num_frames_ = 0;
  std::vector<std::size_t> cuts_;
};

struct TextCorpus {
  std::vector<PhonemeSequence> sequences;

  /// Throws if a sequence is empty or uses an id outside [0, inventory_size).
  void validate(int inventory_size) const;
  std::size_t num_tokens() const;
};

/// Parametric stand-in for a real corpus: phoneme strings from a bigram
/// process, uniform durations, Gaussian frames around per-phoneme means.
struct SyntheticSpec {
  int num_phonemes = 0;
  int dim = 0;
  Tensor2 cluster_means;            // M x d
  double cluster_stddev = 1.0;
  int duration_min = 1;
  int duration_max = 1;
  std::vector<double> initial_probs;  // M
  Tensor2 transition_probs;           // M x M, row-stochastic
  int utterance_count = 0;
  int mean_utterance_length = 1;    // phonemes per utterance

  void validate() const;
};

/// Knobs for make_synthetic_spec.
struct SyntheticParams {
  int num_phonemes = 6;
  int dim = 8;
  double separation = 4.0;      // minimum pairwise distance of cluster means
  double stddev = 1.0;
  int duration_min = 3;
  int duration_max = 8;
  int utterance_count = 400;
  int mean_utterance_length = 10;
  double bigram_skew = 1.5;     // log-normal spread of bigram weights
};

/// Draws cluster means and bigram statistics.  Self-transitions are given
/// zero probability.
SyntheticSpec make_synthetic_spec(const SyntheticParams &params, uint64_t seed);

struct SyntheticCorpus {
  std::vector<Utterance> utterances;
  std::vector<PhonemeSequence> transcriptions;
  std::vector<Segmentation> segmentations;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec &spec,
                                          uint64_t seed);

/// Utterance-wise mean and variance normalization.  Constant dimensions map
/// to zero.  Requires T >= 2.
Utterance apply_cmvn(const Utterance &u);

struct AugmentStats {
  std::size_t input_tokens = 0;
  std::size_t deleted = 0;
  std::size_t duplicated = 0;
};

/// Per-token process: delete with probability delete_rate; otherwise emit,
/// and emit a second copy with probability duplicate_rate / (1 - delete_rate)
/// so that the unconditional duplicate fraction equals duplicate_rate.
/// Sequences that lose every token are redrawn.
TextCorpus augment_text(const TextCorpus &corpus, double delete_rate,
                        double duplicate_rate, uint64_t seed,
                        AugmentStats *stats = nullptr);

/// Peak picking on the feature difference norm.  The strength of a cut at c
/// is the distance between the means of the `window` frames before and after
/// it (truncated at the edges); window 1 is the plain frame-to-frame
/// difference.  A cut is placed at local maxima above the given quantile of
/// the utterance's strengths, strongest first, as long as every segment keeps
/// at least min_len frames.
Segmentation initial_segmentation(const Utterance &u, std::size_t min_len,
                                  double threshold_quantile,
                                  std::size_t window = 1);

enum class SplitMode { kMatched, kNonmatched };

struct CorpusSplit {
  std::vector<std::string> acoustic_ids;
  std::vector<std::string> text_ids;
  SplitMode mode = SplitMode::kMatched;
};

/// Matched: both sides are all utterances.  Nonmatched: the first
/// floor(N * acoustic_fraction) utterances are acoustic, the rest supply text.
CorpusSplit split_corpus(const std::vector<Utterance> &utterances,
                         const std::vector<PhonemeSequence> &transcriptions,
                         SplitMode mode, double acoustic_fraction = 0.75);

SplitMode parse_split_mode(const std::string &s);
std::string to_string(SplitMode mode);

/// Collapses runs of identical consecutive symbols.
PhonemeSequence collapse_repeats(const PhonemeSequence &seq);

/// Repeats each segment's label over its frames.
std::vector<int> expand_to_frames(const PhonemeSequence &labels,
                                  const Segmentation &seg);

}  // namespace uasr

#endif  // UASR_CORPUS_H_
