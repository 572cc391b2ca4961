// uasr/gan.h

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

// Segmental WGAN-GP: a frame classifier whose per-segment samples are scored
// by a convolutional critic against real phoneme sequences.

#ifndef UASR_GAN_H_
#define UASR_GAN_H_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uasr/corpus.h"
#include "uasr/decoder.h"
#include "uasr/ngram.h"
#include "uasr/nnet.h"

namespace uasr {

// ---------------------------------------------------------------------------
// Generator

/// Frame classifier: hidden ReLU layers followed by a softmax over phonemes.
/// Frame t sees frames t-c..t+c concatenated, c = context_window / 2, with
/// edge frames replicated.
struct Generator {
  int context_window = 11;
  std::size_t feat_dim = 0;
  int num_phonemes = 0;
  std::vector<DenseLayer> layers;

  static Generator init(std::size_t feat_dim, int num_phonemes,
                        const std::vector<std::size_t> &hidden,
                        int context_window, Rng &rng);

  ParamRefs params();
  ConstParamRefs params() const;

  Checkpoint to_checkpoint() const;
  static Generator from_checkpoint(const Checkpoint &ckpt);
};

/// Context-window inputs for the listed frames, one row per frame.
Tensor2 context_inputs(const Utterance &u, std::span<const std::size_t> frames,
                       int context_window);

struct GeneratorPass {
  std::vector<DenseContext> contexts;
  Tensor2 output;  // rows are distributions
};

GeneratorPass generator_forward(const Generator &g, const Tensor2 &inputs);

/// Accumulates parameter gradients (ordered as Generator::params) for the
/// given gradient with respect to the output rows.
void generator_backward(const Generator &g, const GeneratorPass &pass,
                        const Tensor2 &grad_output, std::vector<Tensor2> *grads);

/// T x M frame distributions.
Tensor2 classify_frames(const Generator &g, const Utterance &u);

/// Per-frame argmax; ties go to the lower id.
std::vector<int> frame_argmax(const Tensor2 &y);

struct GeneratedSequence {
  Tensor2 rows;  // L x M
  std::string source;
  std::vector<std::size_t> sampled_frames;
};

/// One uniformly drawn frame per segment.
std::vector<std::size_t> sample_segment_frames(const Segmentation &s, Rng &rng);

GeneratedSequence sample_segments(const Tensor2 &y, const Segmentation &s,
                                  Rng &rng);

// ---------------------------------------------------------------------------
// Discriminator

/// Two multi-kernel convolutions with leaky ReLU, a mean over the valid
/// frames and an affine head.
struct Discriminator {
  MultiKernelConv1d layer1;
  MultiKernelConv1d layer2;
  Tensor2 head_weight;  // 1 x layer2 channels
  Tensor2 head_bias;    // 1 x 1

  int num_phonemes() const { return static_cast<int>(layer1.in_channels); }

  static Discriminator init(int num_phonemes, const std::vector<int> &widths1,
                            std::size_t channels1,
                            const std::vector<int> &widths2,
                            std::size_t channels2, Rng &rng);

  /// Order: layer1 banks (weight, bias), layer2 banks, head weight, head bias.
  ParamRefs params();
  ConstParamRefs params() const;

  Checkpoint to_checkpoint() const;
  static Discriminator from_checkpoint(const Checkpoint &ckpt);
};

/// One-hot rows for a phoneme sequence.
Tensor2 one_hot_rows(const PhonemeSequence &seq, int num_phonemes);

/// Copies rows into a zero matrix of max_len rows.  Throws ShapeError if the
/// sequence is longer.
Tensor2 pad_rows(const Tensor2 &rows, std::size_t max_len);

/// Activations kept for the backward passes.  Only the first valid_len rows
/// of the input take part.
struct CriticPass {
  std::size_t padded_len = 0;
  std::size_t valid_len = 0;
  Tensor2 input;   // valid_len x M
  Tensor2 act1;    // leaky ReLU outputs of layer 1
  Tensor2 slope1;  // leaky ReLU derivative masks
  Tensor2 act2;
  Tensor2 slope2;
  double value = 0.0;
};

CriticPass critic_forward(const Discriminator &d, const Tensor2 &p,
                          std::size_t valid_len);

/// Returns scale * dD/dP (padded_len rows, zero past valid_len) and, when grads is
/// non-null, adds scale * dD/dtheta to it (ordered as Discriminator::params).
Tensor2 critic_backward(const Discriminator &d, const CriticPass &pass,
                        double scale, std::vector<Tensor2> *grads);

double discriminate(const Discriminator &d, const Tensor2 &p,
                    std::size_t valid_len);

/// u * real + (1 - u) * gen over equal-shape padded matrices.
Tensor2 interpolate_pair(const Tensor2 &real_padded, const Tensor2 &gen_padded,
                         double u);

/// (norm - 1)^2 of the critic's input gradient at p, the norm taken over
/// the first valid_len rows.  When grads is non-null, adds scale times its
/// parameter gradient.
double penalty_term(const Discriminator &d, const Tensor2 &p,
                    std::size_t valid_len, double scale,
                    std::vector<Tensor2> *grads);

/// Mean of penalty_term over the batch; grads receive scale times the
/// gradient of that mean.
double gradient_penalty(const Discriminator &d, const std::vector<Tensor2> &inter,
                        const std::vector<std::size_t> &valid_lens, double scale,
                        std::vector<Tensor2> *grads);

struct DiscriminatorLoss {
  double value = 0.0;
  double mean_gen = 0.0;
  double mean_real = 0.0;
  double penalty = 0.0;
};

/// mean D(gen) - mean D(real) + alpha * L_gp.  Pair k is interpolated with
/// weight u[k] after padding both sides to max_seq_len; its valid length is
/// the longer of the two.  Adds the parameter gradient to grads if non-null.
DiscriminatorLoss discriminator_loss(const Discriminator &d,
                                     const std::vector<Tensor2> &gen,
                                     const std::vector<Tensor2> &real,
                                     double alpha, std::span<const double> u,
                                     std::size_t max_seq_len,
                                     std::vector<Tensor2> *grads);

using FramePair = std::array<std::size_t, 2>;

/// pairs_per_segment draws per segment of length >= 2, each an ordered pair
/// of distinct frames chosen uniformly inside the segment.
std::vector<FramePair> sample_intra_pairs(const Segmentation &s,
                                          int pairs_per_segment, Rng &rng);

/// (1/K) sum_k sum_pairs |y_i - y_j|^2 over K utterances.  grads, when
/// non-null, holds one matrix per utterance shaped like y and receives the
/// gradient.
double intra_segment_loss(const std::vector<Tensor2> &y,
                          const std::vector<std::vector<FramePair>> &pairs,
                          std::vector<Tensor2> *grads);

/// -mean D(gen) + lambda * l_intra.  grad_gen, when non-null, receives
/// dL/d(gen rows) of the first term (one matrix per sequence).
double generator_loss(const Discriminator &d, const std::vector<Tensor2> &gen,
                      double l_intra, double lambda,
                      std::vector<Tensor2> *grad_gen);

/// Inputs of one generator update: per utterance, the frame drawn from each
/// segment and the intra-segment pairs.
struct GeneratorBatch {
  std::vector<const Utterance *> utts;
  std::vector<std::vector<std::size_t>> sampled;
  std::vector<std::vector<FramePair>> pairs;
};

/// Generator loss of a batch, end to end from features.  When grads is
/// non-null (shaped like Generator::params) the parameter gradient is added.
double generator_objective(const Generator &g, const Discriminator &d,
                           const GeneratorBatch &batch, double lambda,
                           std::vector<Tensor2> *grads);

// ---------------------------------------------------------------------------
// Training

struct GanConfig {
  double lambda = 0.5;
  double alpha = 10.0;
  std::size_t batch_size = 150;
  int d_steps_per_g_step = 3;
  double lr_g = 0.001;
  double lr_d = 0.002;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  int pairs_per_segment = 6;
  /// 0 selects the 95th percentile of real sequence lengths.
  std::size_t max_seq_len = 0;
  /// Real sequences in a critic batch take the lengths of the generated ones
  /// (a random window when no text sequence has that exact length).
  bool match_lengths = true;
  int epochs = 1;
  uint64_t seed = 0;

  std::vector<std::size_t> hidden{512};
  int context_window = 11;
  std::vector<int> d_widths1{3, 5, 7, 9};
  std::size_t d_channels1 = 256;
  std::vector<int> d_widths2{3};
  std::size_t d_channels2 = 1024;

  void validate() const;
};

/// Real text drawn at a requested length: uniformly among the indexed
/// sequences of exactly that length, else a uniformly placed window of a
/// uniformly drawn longer one.
class LengthSampler {
 public:
  LengthSampler(const TextCorpus &corpus, const std::vector<std::size_t> &indices);
  /// False, leaving out untouched, when no indexed sequence is len or longer.
  bool draw(std::size_t len, Rng &rng, PhonemeSequence *out) const;

 private:
  const TextCorpus *corpus_;
  std::map<std::size_t, std::vector<std::size_t>> by_len_;
};

struct GanTraceRecord {
  uint64_t step = 0;
  bool discriminator = true;
  double value = 0.0;
  double wall_ms = 0.0;
};

struct GanTrace {
  std::vector<GanTraceRecord> records;
  std::size_t max_seq_len = 0;
  std::size_t excluded_real = 0;
  std::size_t excluded_acoustic = 0;

  /// "step loss_D|loss_G value wall_ms" per line.
  std::string to_text() const;
};

struct GanModel {
  Generator generator;
  Discriminator discriminator;
};

/// Nearest-rank percentile of the sequence lengths.
std::size_t length_percentile(const std::vector<PhonemeSequence> &seqs,
                              double pct);

/// Each cycle runs d_steps_per_g_step critic updates then one generator
/// update; an epoch is ceil(N_acoustic / K) cycles.  Acoustic and real
/// batches are drawn from separately shuffled streams; real batches are
/// half original, half augmented sequences.  warm_start, when given,
/// replaces the random generator initialization.
GanModel train_gan(const std::vector<Utterance> &utts,
                   const std::vector<Segmentation> &segs,
                   const TextCorpus &real, const TextCorpus &augmented,
                   int num_phonemes, const GanConfig &cfg, GanTrace *trace,
                   const Generator *warm_start = nullptr);

// ---------------------------------------------------------------------------
// Inference

/// Per segment, the argmax phoneme of the frame whose winning probability
/// is highest.  Ties: lower phoneme id, then earlier frame.
PhonemeSequence infer_segment_vote(const Tensor2 &y, const Segmentation &s);

enum class TranscribeMode { kSegmentVote, kHmmDecode };

/// hmm-decode mode treats log y as emissions of one-state phoneme HMMs and
/// decodes with the LM; segs may then be empty.
std::vector<PhonemeSequence> transcribe_corpus(
    const Generator &g, const std::vector<Utterance> &utts,
    const std::vector<Segmentation> &segs, TranscribeMode mode,
    const NGramLm *lm = nullptr, const DecodeConfig &decode = {},
    double self_loop = 0.95);

}  // namespace uasr

#endif  // UASR_GAN_H_
