// src/corpus.cc

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

#include "uasr/corpus.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "uasr/common.h"

namespace uasr {

// ---------------------------------------------------------------------------
// PhonemeInventory

PhonemeInventory::PhonemeInventory(std::vector<std::string> symbols)
    : symbols_(std::move(symbols)) {
  if (symbols_.size() < 2)
    throw ConfigError("phoneme inventory needs at least 2 symbols");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) throw ConfigError("empty phoneme symbol");
    if (!index_.emplace(symbols_[i], static_cast<int>(i)).second)
      throw ConfigError("duplicate phoneme symbol '" + symbols_[i] + "'");
  }
}

int PhonemeInventory::id(const std::string &symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end())
    throw ParseError("unknown phoneme symbol '" + symbol + "'");
  return it->second;
}

void PhonemeInventory::set_eval_map(
    const std::map<std::string, std::string> &map) {
  std::vector<int> ids(symbols_.size(), -1);
  std::vector<std::string> score_symbols;
  std::map<std::string, int> score_index;
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    auto it = map.find(symbols_[i]);
    if (it == map.end())
      throw ConfigError("eval map does not cover symbol '" + symbols_[i] + "'");
    auto [pos, inserted] =
        score_index.emplace(it->second, static_cast<int>(score_symbols.size()));
    if (inserted) score_symbols.push_back(it->second);
    ids[i] = pos->second;
  }
  for (const auto &kv : map)
    if (!index_.count(kv.first))
      throw ConfigError("eval map names unknown symbol '" + kv.first + "'");
  score_ids_ = std::move(ids);
  score_symbols_ = std::move(score_symbols);
}

int PhonemeInventory::score_id(int id) const {
  if (id < 0 || id >= size())
    throw ParseError("phoneme id " + std::to_string(id) + " outside inventory");
  return score_ids_.empty() ? id : score_ids_[id];
}

int PhonemeInventory::score_size() const {
  return score_ids_.empty() ? size()
                            : static_cast<int>(score_symbols_.size());
}

const std::string &PhonemeInventory::score_symbol(int score_id) const {
  return score_ids_.empty() ? symbols_.at(score_id)
                            : score_symbols_.at(score_id);
}

PhonemeSequence PhonemeInventory::encode(
    const std::vector<std::string> &symbols) const {
  PhonemeSequence out;
  out.reserve(symbols.size());
  for (const auto &s : symbols) out.push_back(id(s));
  return out;
}

std::vector<std::string> PhonemeInventory::decode(
    const PhonemeSequence &seq) const {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (int p : seq) out.push_back(symbols_.at(p));
  return out;
}

// ---------------------------------------------------------------------------
// Utterance, Segmentation, TextCorpus

void Utterance::validate() const {
  if (features.rows() < 1) throw ShapeError("utterance '" + id + "': T < 1");
  if (features.cols() < 1) throw ShapeError("utterance '" + id + "': d < 1");
  if (!features.all_finite())
    throw NumericError("utterance '" + id + "': non-finite feature value");
}

Segmentation::Segmentation(std::size_t num_frames, std::vector<std::size_t> cuts)
    : num_frames_(num_frames), cuts_(std::move(cuts)) {
  if (num_frames_ < 1) throw ShapeError("segmentation over zero frames");
  std::size_t prev = 0;
  for (std::size_t c : cuts_) {
    if (c <= prev || c >= num_frames_)
      throw ShapeError("segmentation cuts must be strictly increasing in "
                       "[1, T-1]");
    prev = c;
  }
}

Segmentation Segmentation::from_lengths(const std::vector<std::size_t> &lengths) {
  if (lengths.empty()) throw ShapeError("segmentation needs >= 1 segment");
  std::vector<std::size_t> cuts;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] == 0) throw ShapeError("empty segment");
    pos += lengths[i];
    if (i + 1 < lengths.size()) cuts.push_back(pos);
  }
  return Segmentation(pos, std::move(cuts));
}

std::vector<std::size_t> Segmentation::lengths() const {
  std::vector<std::size_t> out(num_segments());
  for (std::size_t l = 0; l < out.size(); ++l) out[l] = length(l);
  return out;
}

std::vector<std::size_t> Segmentation::frame_owner() const {
  std::vector<std::size_t> owner(num_frames_);
  for (std::size_t l = 0; l < num_segments(); ++l)
    for (std::size_t t = begin(l); t < end(l); ++t) owner[t] = l;
  return owner;
}

void TextCorpus::validate(int inventory_size) const {
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (sequences[i].empty())
      throw ConfigError("text corpus: empty sequence #" + std::to_string(i));
    for (int p : sequences[i])
      if (p < 0 || p >= inventory_size)
        throw ConfigError("text corpus: symbol id outside inventory");
  }
}

std::size_t TextCorpus::num_tokens() const {
  std::size_t n = 0;
  for (const auto &s : sequences) n += s.size();
  return n;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void SyntheticSpec::validate() const {
  if (num_phonemes < 2) throw ConfigError("synthetic spec: M < 2");
  if (dim < 1) throw ConfigError("synthetic spec: d < 1");
  if (cluster_means.rows() != static_cast<std::size_t>(num_phonemes) ||
      cluster_means.cols() != static_cast<std::size_t>(dim))
    throw ConfigError("synthetic spec: cluster_means must be M x d");
  if (!(cluster_stddev >= 0.0)) throw ConfigError("synthetic spec: stddev < 0");
  if (duration_min < 1 || duration_min > duration_max)
    throw ConfigError("synthetic spec: need 1 <= duration_min <= duration_max");
  if (utterance_count < 0 || mean_utterance_length < 1)
    throw ConfigError("synthetic spec: bad utterance count/length");
  if (initial_probs.size() != static_cast<std::size_t>(num_phonemes) ||
      transition_probs.rows() != static_cast<std::size_t>(num_phonemes) ||
      transition_probs.cols() != static_cast<std::size_t>(num_phonemes))
    throw ConfigError("synthetic spec: bigram statistics have wrong shape");
  for (int a = 0; a < num_phonemes; ++a)
    for (int b = a + 1; b < num_phonemes; ++b) {
      bool same = true;
      for (int k = 0; k < dim; ++k)
        same = same && cluster_means(a, k) == cluster_means(b, k);
      if (same) throw ConfigError("synthetic spec: duplicate cluster means");
    }
}

namespace {

std::vector<double> normalized(std::vector<double> w) {
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (double &v : w) v /= s;
  return w;
}

int draw_categorical(Rng &rng, std::span<const double> probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Rounding left u above the final cumulative sum.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return static_cast<int>(i);
  return 0;
}

}  // namespace

SyntheticSpec make_synthetic_spec(const SyntheticParams &p, uint64_t seed) {
  Rng rng(seed);
  SyntheticSpec spec;
  spec.num_phonemes = p.num_phonemes;
  spec.dim = p.dim;
  spec.cluster_stddev = p.stddev;
  spec.duration_min = p.duration_min;
  spec.duration_max = p.duration_max;
  spec.utterance_count = p.utterance_count;
  spec.mean_utterance_length = p.mean_utterance_length;

  const int m = p.num_phonemes;
  spec.cluster_means = Tensor2(m, p.dim);
  for (double &v : spec.cluster_means.data()) v = rng.normal();
  double min_dist = std::numeric_limits<double>::infinity();
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) {
      double d2 = 0.0;
      for (int k = 0; k < p.dim; ++k) {
        const double diff = spec.cluster_means(a, k) - spec.cluster_means(b, k);
        d2 += diff * diff;
      }
      min_dist = std::min(min_dist, std::sqrt(d2));
    }
  if (min_dist > 0.0) spec.cluster_means *= p.separation / min_dist;

  std::vector<double> init(m);
  for (double &v : init) v = std::exp(p.bigram_skew * rng.normal());
  spec.initial_probs = normalized(init);
  spec.transition_probs = Tensor2(m, m);
  for (int a = 0; a < m; ++a) {
    std::vector<double> row(m);
    for (int b = 0; b < m; ++b)
      row[b] = a == b ? 0.0 : std::exp(p.bigram_skew * rng.normal());
    row = normalized(row);
    std::copy(row.begin(), row.end(), spec.transition_probs.row(a).begin());
  }
  spec.validate();
  return spec;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec &spec,
                                          uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  SyntheticCorpus out;
  const int mean_len = spec.mean_utterance_length;
  const int len_lo = std::max(1, mean_len - mean_len / 2);
  const int len_hi = mean_len + mean_len / 2;
  for (int u = 0; u < spec.utterance_count; ++u) {
    const int len = len_lo + static_cast<int>(rng.uniform_int(len_hi - len_lo + 1));
    PhonemeSequence phones;
    phones.push_back(draw_categorical(rng, spec.initial_probs));
    while (static_cast<int>(phones.size()) < len)
      phones.push_back(
          draw_categorical(rng, spec.transition_probs.row(phones.back())));

    std::vector<std::size_t> durations;
    for (std::size_t i = 0; i < phones.size(); ++i)
      durations.push_back(spec.duration_min +
                          rng.uniform_int(spec.duration_max - spec.duration_min + 1));
    Segmentation seg = Segmentation::from_lengths(durations);

    Utterance utt;
    char name[32];
    std::snprintf(name, sizeof(name), "utt%05d", u);
    utt.id = name;
    utt.features = Tensor2(seg.num_frames(), spec.dim);
    for (std::size_t l = 0; l < phones.size(); ++l)
      for (std::size_t t = seg.begin(l); t < seg.end(l); ++t)
        for (int k = 0; k < spec.dim; ++k)
          utt.features(t, k) = spec.cluster_means(phones[l], k) +
                               spec.cluster_stddev * rng.normal();
    out.utterances.push_back(std::move(utt));
    out.transcriptions.push_back(std::move(phones));
    out.segmentations.push_back(std::move(seg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization, augmentation, segmentation

Utterance apply_cmvn(const Utterance &u) {
  const std::size_t t_len = u.num_frames(), dim = u.dim();
  if (t_len < 2)
    throw NumericError("apply_cmvn: utterance '" + u.id +
                       "' has T < 2, variance undefined");
  Utterance out{u.id, Tensor2(t_len, dim)};
  for (std::size_t k = 0; k < dim; ++k) {
    double mean = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) mean += u.features(t, k);
    mean /= static_cast<double>(t_len);
    double var = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      const double c = u.features(t, k) - mean;
      var += c * c;
    }
    var /= static_cast<double>(t_len);
    // Constant column (up to rounding of the mean) maps to zeros.
    const double scale = std::max(std::abs(mean), 1.0);
    if (var <= 1e-24 * scale * scale) continue;
    const double inv_sd = 1.0 / std::sqrt(var);
    for (std::size_t t = 0; t < t_len; ++t)
      out.features(t, k) = (u.features(t, k) - mean) * inv_sd;
  }
  return out;
}

TextCorpus augment_text(const TextCorpus &corpus, double delete_rate,
                        double duplicate_rate, uint64_t seed,
                        AugmentStats *stats) {
  if (!(delete_rate >= 0.0 && delete_rate < 1.0))
    throw ConfigError("augment_text: delete_rate must be in [0, 1)");
  if (!(duplicate_rate >= 0.0 && duplicate_rate <= 1.0))
    throw ConfigError("augment_text: duplicate_rate must be in [0, 1]");
  if (duplicate_rate > 1.0 - delete_rate + 1e-15)
    throw ConfigError(
        "augment_text: duplicate_rate cannot exceed 1 - delete_rate");
  const double dup_given_kept =
      std::min(1.0, duplicate_rate / (1.0 - delete_rate));

  Rng rng(seed);
  TextCorpus out;
  AugmentStats local;
  for (const auto &seq : corpus.sequences) {
    if (seq.empty()) throw ConfigError("augment_text: empty input sequence");
    PhonemeSequence aug;
    std::size_t deleted = 0, duplicated = 0;
    do {
      aug.clear();
      deleted = duplicated = 0;
      for (int p : seq) {
        if (rng.bernoulli(delete_rate)) {
          ++deleted;
          continue;
        }
        aug.push_back(p);
        if (rng.bernoulli(dup_given_kept)) {
          aug.push_back(p);
          ++duplicated;
        }
      }
    } while (aug.empty());
    local.input_tokens += seq.size();
    local.deleted += deleted;
    local.duplicated += duplicated;
    out.sequences.push_back(std::move(aug));
  }
  if (stats) *stats = local;
  return out;
}

namespace {

// Linear interpolation between order statistics (the usual "type 7").
double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

Segmentation initial_segmentation(const Utterance &u, std::size_t min_len,
                                  double threshold_quantile,
                                  std::size_t window) {
  const std::size_t t_len = u.num_frames();
  if (t_len < 1) throw ShapeError("initial_segmentation: empty utterance");
  if (t_len == 1) return Segmentation::single(1);
  min_len = std::max<std::size_t>(min_len, 1);
  if (window < 1) throw ConfigError("initial_segmentation: window must be >= 1");

  // diff[c - 1] is the strength of a cut at c (0-based frames c - 1 | c).
  std::vector<double> diff(t_len - 1);
  for (std::size_t c = 1; c < t_len; ++c) {
    const std::size_t lo = c >= window ? c - window : 0;
    const std::size_t hi = std::min(t_len, c + window);
    double s = 0.0;
    for (std::size_t k = 0; k < u.dim(); ++k) {
      double left = 0.0, right = 0.0;
      for (std::size_t t = lo; t < c; ++t) left += u.features(t, k);
      for (std::size_t t = c; t < hi; ++t) right += u.features(t, k);
      const double d = left / static_cast<double>(c - lo) -
                       right / static_cast<double>(hi - c);
      s += d * d;
    }
    diff[c - 1] = std::sqrt(s);
  }
  const double threshold = quantile(diff, threshold_quantile);

  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    const bool left_ok = i == 0 || diff[i] >= diff[i - 1];
    const bool right_ok = i + 1 == diff.size() || diff[i] >= diff[i + 1];
    if (diff[i] > threshold && left_ok && right_ok) peaks.push_back(i + 1);
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [&](std::size_t a, std::size_t b) {
                     return diff[a - 1] > diff[b - 1];
                   });

  std::vector<std::size_t> cuts;
  for (std::size_t c : peaks) {
    if (c < min_len || t_len - c < min_len) continue;
    auto it = std::lower_bound(cuts.begin(), cuts.end(), c);
    const std::size_t left = it == cuts.begin() ? 0 : *std::prev(it);
    const std::size_t right = it == cuts.end() ? t_len : *it;
    if (c - left < min_len || right - c < min_len) continue;
    cuts.insert(it, c);
  }
  return Segmentation(t_len, std::move(cuts));
}

CorpusSplit split_corpus(const std::vector<Utterance> &utterances,
                         const std::vector<PhonemeSequence> &transcriptions,
                         SplitMode mode, double acoustic_fraction) {
  if (utterances.size() != transcriptions.size())
    throw ConfigError("split_corpus: utterance/transcription count mismatch");
  CorpusSplit split;
  split.mode = mode;
  if (mode == SplitMode::kMatched) {
    for (const auto &u : utterances) split.acoustic_ids.push_back(u.id);
    split.text_ids = split.acoustic_ids;
    return split;
  }
  if (!(acoustic_fraction > 0.0 && acoustic_fraction < 1.0))
    throw ConfigError("split_corpus: acoustic fraction must be in (0, 1)");
  const std::size_t n = utterances.size();
  const auto n_acoustic = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * acoustic_fraction + 1e-9));
  if (n < 2 || n_acoustic == 0 || n_acoustic == n)
    throw ConfigError("split_corpus: not enough utterances for a disjoint "
                      "nonmatched split");
  for (std::size_t i = 0; i < n; ++i)
    (i < n_acoustic ? split.acoustic_ids : split.text_ids)
        .push_back(utterances[i].id);
  return split;
}

SplitMode parse_split_mode(const std::string &s) {
  if (s == "matched") return SplitMode::kMatched;
  if (s == "nonmatched") return SplitMode::kNonmatched;
  throw ConfigError("unknown split mode '" + s + "'");
}

std::string to_string(SplitMode mode) {
  return mode == SplitMode::kMatched ? "matched" : "nonmatched";
}

PhonemeSequence collapse_repeats(const PhonemeSequence &seq) {
  PhonemeSequence out;
  for (int p : seq)
    if (out.empty() || out.back() != p) out.push_back(p);
  return out;
}

std::vector<int> expand_to_frames(const PhonemeSequence &labels,
                                  const Segmentation &seg) {
  if (labels.size() != seg.num_segments())
    throw ShapeError("expand_to_frames: label count differs from segment count");
  std::vector<int> out(seg.num_frames());
  for (std::size_t l = 0; l < labels.size(); ++l)
    std::fill(out.begin() + seg.begin(l), out.begin() + seg.end(l), labels[l]);
  return out;
}

}  // namespace uasr
