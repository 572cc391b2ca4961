// src/harmonize.cc

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

#include "uasr/harmonize.h"

#include <charconv>
#include <filesystem>
#include <map>
#include <sstream>

#include "uasr/eval.h"
#include "uasr/io.h"
#include "uasr/ngram.h"

namespace uasr {

namespace fs = std::filesystem;

void HarmonizeData::validate() const {
  const int m = inventory.size();
  if (m < 2) throw ConfigError("harmonize: inventory needs at least 2 phonemes");
  if (acoustic.empty()) throw ConfigError("harmonize: no acoustic utterances");
  if (initial_boundaries.size() != acoustic.size())
    throw ConfigError("harmonize: need one initial segmentation per utterance");
  text.validate(m);
  augmented.validate(m);
  for (std::size_t i = 0; i < acoustic.size(); ++i)
    if (initial_boundaries[i].num_frames() != acoustic[i].num_frames())
      throw ShapeError("harmonize: boundaries of '" + acoustic[i].id +
                       "' do not match its frames");
  if (has_reference()) {
    if (ref_transcriptions.size() != acoustic.size() ||
        ref_frames.size() != acoustic.size())
      throw ConfigError("harmonize: reference labels do not cover the utterances");
    for (std::size_t i = 0; i < acoustic.size(); ++i)
      if (ref_frames[i].size() != acoustic[i].num_frames())
        throw ShapeError("harmonize: reference frames of '" + acoustic[i].id +
                         "' have the wrong length");
  }
}

void HarmonizeConfig::validate() const {
  if (max_iterations < 1) throw ConfigError("harmonize: max_iterations must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("harmonize: threshold must be in (0, 1)");
  if (hmm_iterations < 0) throw ConfigError("harmonize: hmm iterations must be >= 0");
  if (lm_order < 1) throw ConfigError("harmonize: lm order must be >= 1");
  gan.validate();
  posterior_decode.validate();
  hmm_decode.validate();
  HmmTopology{2, hmm_states, self_loop}.validate();
  if (!(floor_scale > 0.0)) throw ConfigError("harmonize: floor scale must be > 0");
}

double label_change_rate(const std::vector<std::vector<int>> &prev,
                         const std::vector<std::vector<int>> &cur) {
  if (prev.size() != cur.size())
    throw ConfigError("label_change_rate: utterance sets differ");
  std::size_t total = 0, changed = 0;
  for (std::size_t u = 0; u < cur.size(); ++u) {
    if (prev[u].size() != cur[u].size())
      throw ShapeError("label_change_rate: frame counts differ for utterance " +
                       std::to_string(u));
    for (std::size_t t = 0; t < cur[u].size(); ++t) changed += prev[u][t] != cur[u][t];
    total += cur[u].size();
  }
  return total == 0 ? 0.0 : static_cast<double>(changed) / total;
}

double boundary_change_rate(const std::vector<Segmentation> &prev,
                            const std::vector<Segmentation> &cur) {
  if (prev.size() != cur.size())
    throw ConfigError("boundary_change_rate: utterance sets differ");
  std::size_t total = 0, changed = 0;
  for (std::size_t u = 0; u < cur.size(); ++u) {
    const std::size_t t_len = cur[u].num_frames();
    if (prev[u].num_frames() != t_len)
      throw ShapeError("boundary_change_rate: frame counts differ");
    std::vector<char> a(t_len, 0), b(t_len, 0);
    for (std::size_t c : prev[u].cuts()) a[c] = 1;
    for (std::size_t c : cur[u].cuts()) b[c] = 1;
    for (std::size_t t = 1; t < t_len; ++t) changed += a[t] != b[t];
    total += t_len > 0 ? t_len - 1 : 0;
  }
  return total == 0 ? 0.0 : static_cast<double>(changed) / total;
}

bool convergence_check(const HarmonizeState &prev, const HarmonizeState &cur,
                       double threshold) {
  return label_change_rate(prev.frame_labels, cur.frame_labels) < threshold;
}

namespace {

std::string metrics_to_text(const IterationMetrics &m) {
  std::ostringstream out;
  out << "iteration\t" << m.iteration << '\n'
      << "has_reference\t" << m.has_reference << '\n'
      << "fer\t" << format_double(m.fer) << '\n'
      << "per\t" << format_double(m.per) << '\n'
      << "gan_fer\t" << format_double(m.gan_fer) << '\n'
      << "gan_per\t" << format_double(m.gan_per) << '\n'
      << "boundary_change\t" << format_double(m.boundary_change) << '\n'
      << "transcription_change\t" << format_double(m.transcription_change) << '\n'
      << "unalignable\t" << m.unalignable << '\n'
      << "converged\t" << m.converged << '\n';
  return out.str();
}

IterationMetrics metrics_from_text(const std::string &text, const std::string &path) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string key, value;
  while (in >> key >> value) kv[key] = value;
  auto get = [&](const char *k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ParseError(path + ": missing '" + k + "'");
    return it->second;
  };
  auto num = [&](const char *k) {
    const std::string s = get(k);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ParseError(path + ": bad value for '" + k + "'");
    return v;
  };
  IterationMetrics m;
  m.iteration = static_cast<int>(num("iteration"));
  m.has_reference = num("has_reference") != 0.0;
  m.fer = num("fer");
  m.per = num("per");
  m.gan_fer = num("gan_fer");
  m.gan_per = num("gan_per");
  m.boundary_change = num("boundary_change");
  m.transcription_change = num("transcription_change");
  m.unalignable = static_cast<std::size_t>(num("unalignable"));
  m.converged = num("converged") != 0.0;
  return m;
}

std::vector<std::string> ids_of(const std::vector<Utterance> &utts) {
  std::vector<std::string> ids;
  for (const auto &u : utts) ids.push_back(u.id);
  return ids;
}

std::map<std::string, std::size_t> frame_counts(const std::vector<Utterance> &utts) {
  std::map<std::string, std::size_t> out;
  for (const auto &u : utts) out[u.id] = u.num_frames();
  return out;
}

// Re-keys a loaded keyed file to the corpus order.
template <typename T>
std::vector<T> in_corpus_order(std::vector<std::pair<std::string, T>> loaded,
                               const std::vector<Utterance> &utts,
                               const std::string &path) {
  std::map<std::string, T> by_id;
  for (auto &[id, v] : loaded) by_id[id] = std::move(v);
  std::vector<T> out;
  for (const auto &u : utts) {
    auto it = by_id.find(u.id);
    if (it == by_id.end()) throw ParseError(path + ": missing utterance '" + u.id + "'");
    out.push_back(std::move(it->second));
  }
  return out;
}

void save_iteration(const fs::path &dir, const HarmonizeData &data,
                    const HarmonizeState &s, const GanTrace &trace) {
  const auto ids = ids_of(data.acoustic);
  const auto &inv = data.inventory;
  save_checkpoint((dir / "generator.ckpt").string(), s.generator.to_checkpoint());
  write_file((dir / "hmm.txt").string(), s.hmm.to_text());
  save_segmentations((dir / "boundaries.txt").string(), ids, s.boundaries);
  save_keyed_sequences((dir / "gan_transcriptions.txt").string(), ids,
                       s.gan_transcriptions, inv);
  save_keyed_sequences((dir / "transcriptions.txt").string(), ids,
                       s.transcriptions, inv);
  std::vector<PhonemeSequence> frames(s.frame_labels.begin(), s.frame_labels.end());
  save_keyed_sequences((dir / "frame_labels.txt").string(), ids, frames, inv);
  write_file((dir / "metrics.tsv").string(), metrics_to_text(s.metrics));
  write_file((dir / "gan_trace.txt").string(), trace.to_text());
}

HarmonizeState load_iteration(const fs::path &dir, const HarmonizeData &data) {
  const auto &inv = data.inventory;
  HarmonizeState s;
  s.generator = Generator::from_checkpoint(
      load_checkpoint((dir / "generator.ckpt").string()));
  s.hmm = HmmSet::from_text(read_file((dir / "hmm.txt").string()));
  auto p = (dir / "boundaries.txt").string();
  s.boundaries = in_corpus_order(
      load_segmentations(p, frame_counts(data.acoustic)), data.acoustic, p);
  p = (dir / "gan_transcriptions.txt").string();
  s.gan_transcriptions = in_corpus_order(load_keyed_sequences(p, inv), data.acoustic, p);
  p = (dir / "transcriptions.txt").string();
  s.transcriptions = in_corpus_order(load_keyed_sequences(p, inv), data.acoustic, p);
  p = (dir / "frame_labels.txt").string();
  auto frames = in_corpus_order(load_keyed_sequences(p, inv), data.acoustic, p);
  s.frame_labels.assign(frames.begin(), frames.end());
  p = (dir / "metrics.tsv").string();
  s.metrics = metrics_from_text(read_file(p), p);
  s.iteration = s.metrics.iteration;
  return s;
}

}  // namespace

std::string history_to_tsv(const std::vector<IterationMetrics> &history) {
  std::ostringstream out;
  out << "iteration\tfer\tper\tboundary_change\ttranscription_change\tgan_fer\t"
         "gan_per\n";
  auto val = [](bool has, double v) { return has ? format_double(v) : std::string("-"); };
  for (const auto &m : history)
    out << m.iteration << '\t' << val(m.has_reference, m.fer) << '\t'
        << val(m.has_reference, m.per) << '\t' << format_double(m.boundary_change)
        << '\t' << format_double(m.transcription_change) << '\t'
        << val(m.has_reference, m.gan_fer) << '\t' << val(m.has_reference, m.gan_per)
        << '\n';
  return out.str();
}

HarmonizeResult harmonize_run(
    const HarmonizeData &data, const HarmonizeConfig &cfg,
    const std::string &run_dir, bool resume,
    const std::function<void(const std::string &)> &progress) {
  data.validate();
  cfg.validate();
  const int m = data.inventory.size();
  auto say = [&](const std::string &s) {
    if (progress) progress(s);
  };
  if (!run_dir.empty()) fs::create_directories(run_dir);

  const NGramLm lm = train_ngram_lm(data.text, m, cfg.lm_order, cfg.lm_discount);
  const HmmTopology posterior_topo{m, 1, cfg.self_loop};
  HmmOptions hopts{m, cfg.hmm_states, cfg.self_loop, cfg.floor_scale};

  HarmonizeResult result;
  HarmonizeState prev;
  prev.boundaries = data.initial_boundaries;

  for (int k = 1; k <= cfg.max_iterations; ++k) {
    const fs::path dir = run_dir.empty() ? fs::path() : fs::path(run_dir) / ("iter_" + std::to_string(k));
    if (resume && !run_dir.empty() && fs::exists(dir / "metrics.tsv")) {
      HarmonizeState s = load_iteration(dir, data);
      say("iteration " + std::to_string(k) + ": loaded from " + dir.string());
      result.history.push_back(s.metrics);
      prev = std::move(s);
      if (prev.metrics.converged) {
        result.converged = true;
        break;
      }
      continue;
    }

    HarmonizeState cur;
    cur.iteration = k;
    GanConfig gcfg = cfg.gan;
    gcfg.seed = derive_seed(cfg.seed, SeedStage::kGanTrain, k);
    GanTrace trace;
    const bool warm = cfg.warm_start && k > 1;
    GanModel model = train_gan(data.acoustic, prev.boundaries, data.text,
                               data.augmented, m, gcfg, &trace,
                               warm ? &prev.generator : nullptr);
    cur.generator = std::move(model.generator);
    say("iteration " + std::to_string(k) + ": GAN trained (" +
        std::to_string(trace.records.size()) + " updates, max_seq_len " +
        std::to_string(trace.max_seq_len) + ", excluded " +
        std::to_string(trace.excluded_acoustic) + " acoustic / " +
        std::to_string(trace.excluded_real) + " text)");

    // Transcription by the generator.
    std::vector<std::vector<int>> gan_frames;
    for (std::size_t i = 0; i < data.acoustic.size(); ++i) {
      const Tensor2 y = classify_frames(cur.generator, data.acoustic[i]);
      gan_frames.push_back(frame_argmax(y));
      if (k == 1) {
        cur.gan_transcriptions.push_back(
            collapse_repeats(infer_segment_vote(y, prev.boundaries[i])));
      } else {
        Tensor2 e = y;
        for (double &v : e.data()) v = std::log(std::max(v, 1e-300));
        cur.gan_transcriptions.push_back(
            decode_viterbi_lm_scores(posterior_topo, e, lm, cfg.posterior_decode)
                .phonemes);
      }
    }

    // HMMs on the alignable transcriptions.
    std::vector<Utterance> train_utts;
    std::vector<PhonemeSequence> train_trans;
    HmmTopology topo{m, cfg.hmm_states, cfg.self_loop};
    for (std::size_t i = 0; i < data.acoustic.size(); ++i) {
      if (alignable(topo, data.acoustic[i].num_frames(), cur.gan_transcriptions[i])) {
        train_utts.push_back(data.acoustic[i]);
        train_trans.push_back(cur.gan_transcriptions[i]);
      }
    }
    cur.metrics.unalignable = data.acoustic.size() - train_utts.size();
    if (train_utts.empty())
      throw NumericError("harmonize: no alignable transcription in iteration " +
                         std::to_string(k));
    cur.hmm = train_hmm(train_utts, train_trans, hopts, cfg.hmm_iterations);
    say("iteration " + std::to_string(k) + ": HMMs trained on " +
        std::to_string(train_utts.size()) + " utterances");

    // Re-transcription with the HMMs.  The next boundaries come from forced
    // alignment of the transcriptions the HMMs were trained on; utterances
    // whose transcription cannot be aligned take the decode's alignment.
    for (std::size_t i = 0; i < data.acoustic.size(); ++i) {
      const Utterance &u = data.acoustic[i];
      PhonemeSequence dec = decode_viterbi_lm(cur.hmm, lm, u, cfg.hmm_decode);
      Alignment ali = viterbi_align(cur.hmm, u, dec);
      cur.frame_labels.push_back(ali.phonemes);
      cur.boundaries.push_back(
          alignable(topo, u.num_frames(), cur.gan_transcriptions[i])
              ? viterbi_align(cur.hmm, u, cur.gan_transcriptions[i]).segmentation
              : ali.segmentation);
      cur.transcriptions.push_back(std::move(dec));
    }

    IterationMetrics &mt = cur.metrics;
    mt.iteration = k;
    mt.has_reference = data.has_reference();
    if (mt.has_reference) {
      const auto &inv = data.inventory;
      mt.fer = frame_error_rate(cur.frame_labels, data.ref_frames, inv);
      mt.per = corpus_phone_error_rate(cur.transcriptions, data.ref_transcriptions, inv).per;
      mt.gan_fer = frame_error_rate(gan_frames, data.ref_frames, inv);
      mt.gan_per =
          corpus_phone_error_rate(cur.gan_transcriptions, data.ref_transcriptions, inv).per;
    }
    mt.boundary_change = boundary_change_rate(prev.boundaries, cur.boundaries);
    // Nothing to compare against before the first realignment.
    mt.transcription_change =
        k == 1 ? 1.0 : label_change_rate(prev.frame_labels, cur.frame_labels);
    mt.converged = k > 1 && mt.transcription_change < cfg.threshold;
    say("iteration " + std::to_string(k) + ": " +
        (mt.has_reference ? "PER " + format_double(mt.per) + " FER " +
                                format_double(mt.fer) + " GAN PER " +
                                format_double(mt.gan_per) + " GAN FER " +
                                format_double(mt.gan_fer) + ", "
                          : std::string()) +
        "label change " + format_double(mt.transcription_change));

    if (!run_dir.empty()) {
      // Written to a scratch directory first so a crash never leaves a
      // half-written iteration behind.
      const fs::path tmp = fs::path(run_dir) / ("iter_" + std::to_string(k) + ".tmp");
      fs::remove_all(tmp);
      fs::create_directories(tmp);
      save_iteration(tmp, data, cur, trace);
      fs::remove_all(dir);
      fs::rename(tmp, dir);
    }
    result.history.push_back(mt);
    if (!run_dir.empty())
      write_file((fs::path(run_dir) / "history.tsv").string(),
                 history_to_tsv(result.history));
    prev = std::move(cur);
    if (prev.metrics.converged) {
      result.converged = true;
      break;
    }
  }
  if (!run_dir.empty())
    write_file((fs::path(run_dir) / "history.tsv").string(),
               history_to_tsv(result.history));
  result.final_state = std::move(prev);
  return result;
}

}  // namespace uasr
