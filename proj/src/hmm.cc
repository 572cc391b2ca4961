// src/hmm.cc

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

#include "uasr/hmm.h"

#include <algorithm>
#include <limits>
#include <numbers>
#include <sstream>

#include "uasr/common.h"
#include "uasr/io.h"

namespace uasr {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

void HmmTopology::validate() const {
  if (num_phonemes < 1) throw ConfigError("HMM topology: no phonemes");
  if (states_per_phoneme < 1) throw ConfigError("HMM topology: no states");
  if (!(self_loop > 0.0 && self_loop < 1.0))
    throw ConfigError("HMM topology: self-loop probability must be in (0, 1)");
}

Tensor2 HmmSet::log_likelihoods(const Utterance &u) const {
  if (u.dim() != dim())
    throw ShapeError("HMM dimension " + std::to_string(dim()) +
                     " differs from features of '" + u.id + "'");
  const std::size_t n_states = means.rows(), d = dim();
  // Per-state constant: -0.5 * sum_k log(2 pi var_k).
  std::vector<double> norm(n_states, 0.0);
  Tensor2 inv_var(n_states, d);
  for (std::size_t j = 0; j < n_states; ++j)
    for (std::size_t k = 0; k < d; ++k) {
      norm[j] -= 0.5 * std::log(2.0 * std::numbers::pi * variances(j, k));
      inv_var(j, k) = 1.0 / variances(j, k);
    }
  Tensor2 out(u.num_frames(), n_states);
  for (std::size_t t = 0; t < u.num_frames(); ++t) {
    auto x = u.features.row(t);
    for (std::size_t j = 0; j < n_states; ++j) {
      const double *mu = means.row(j).data();
      const double *iv = inv_var.row(j).data();
      double q = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[k] - mu[k];
        q += diff * diff * iv[k];
      }
      out(t, j) = norm[j] - 0.5 * q;
    }
  }
  return out;
}

std::string HmmSet::to_text() const {
  std::ostringstream out;
  out << "hmm " << topology.num_phonemes << ' ' << topology.states_per_phoneme
      << ' ' << dim() << ' ' << format_double(topology.self_loop) << '\n';
  out << "floor";
  for (double v : variance_floor) out << ' ' << format_double(v);
  out << '\n';
  for (int p = 0; p < topology.num_phonemes; ++p)
    for (int s = 0; s < topology.states_per_phoneme; ++s) {
      const int j = topology.state_index(p, s);
      out << "state " << p << ' ' << s << " mean";
      for (double v : means.row(j)) out << ' ' << format_double(v);
      out << " var";
      for (double v : variances.row(j)) out << ' ' << format_double(v);
      out << '\n';
    }
  return out.str();
}

HmmSet HmmSet::from_text(const std::string &text) {
  std::istringstream in(text);
  std::string tag;
  HmmSet h;
  std::size_t d = 0;
  if (!(in >> tag) || tag != "hmm") throw ParseError("HMM file: missing header");
  if (!(in >> h.topology.num_phonemes >> h.topology.states_per_phoneme >> d >>
        h.topology.self_loop))
    throw ParseError("HMM file: malformed header");
  h.topology.validate();
  if (!(in >> tag) || tag != "floor") throw ParseError("HMM file: missing floor");
  h.variance_floor.resize(d);
  for (double &v : h.variance_floor)
    if (!(in >> v)) throw ParseError("HMM file: malformed floor");
  const int n = h.topology.num_states();
  h.means = Tensor2(n, d);
  h.variances = Tensor2(n, d);
  for (int i = 0; i < n; ++i) {
    int p = 0, s = 0;
    if (!(in >> tag >> p >> s) || tag != "state" || p < 0 ||
        p >= h.topology.num_phonemes || s < 0 ||
        s >= h.topology.states_per_phoneme)
      throw ParseError("HMM file: malformed state line " + std::to_string(i));
    const int j = h.topology.state_index(p, s);
    if (!(in >> tag) || tag != "mean") throw ParseError("HMM file: expected mean");
    for (std::size_t k = 0; k < d; ++k)
      if (!(in >> h.means(j, k))) throw ParseError("HMM file: bad mean");
    if (!(in >> tag) || tag != "var") throw ParseError("HMM file: expected var");
    for (std::size_t k = 0; k < d; ++k)
      if (!(in >> h.variances(j, k)) || !(h.variances(j, k) > 0.0))
        throw ParseError("HMM file: bad variance");
  }
  return h;
}

bool alignable(const HmmTopology &topo, std::size_t num_frames,
               const PhonemeSequence &transcription) {
  return !transcription.empty() &&
         transcription.size() * static_cast<std::size_t>(topo.states_per_phoneme) <=
             num_frames;
}

Alignment viterbi_align_scores(const HmmTopology &topo, const Tensor2 &emissions,
                               const PhonemeSequence &transcription) {
  topo.validate();
  const std::size_t t_len = emissions.rows();
  const int s_per = topo.states_per_phoneme;
  if (emissions.cols() != static_cast<std::size_t>(topo.num_states()))
    throw ShapeError("viterbi_align: emission matrix has wrong state count");
  for (int p : transcription)
    if (p < 0 || p >= topo.num_phonemes)
      throw ShapeError("viterbi_align: phoneme id outside topology");
  if (!alignable(topo, t_len, transcription))
    throw NumericError("unalignable transcription: " +
                       std::to_string(transcription.size()) + " phonemes x " +
                       std::to_string(s_per) + " states > " +
                       std::to_string(t_len) + " frames");

  const std::size_t n = transcription.size() * s_per;
  auto column = [&](std::size_t j) {
    return topo.state_index(transcription[j / s_per], static_cast<int>(j % s_per));
  };
  const double l_self = topo.log_self(), l_adv = topo.log_advance();

  std::vector<double> prev(n, kNegInf), cur(n, kNegInf);
  // advanced[t][j]: whether state j at frame t was entered from j - 1.
  std::vector<std::vector<char>> advanced(t_len, std::vector<char>(n, 0));
  prev[0] = emissions(0, column(0));
  for (std::size_t t = 1; t < t_len; ++t) {
    // State j is reachable at t only if j <= t and the rest of the chain
    // still fits in the remaining frames.
    const std::size_t remaining = t_len - 1 - t;
    for (std::size_t j = 0; j < n; ++j) {
      if (j > t || n - 1 - j > remaining) {
        cur[j] = kNegInf;
        continue;
      }
      const double stay = prev[j] + l_self;
      const double adv = j > 0 ? prev[j - 1] + l_adv : kNegInf;
      if (adv > stay) {
        cur[j] = adv;
        advanced[t][j] = 1;
      } else {
        cur[j] = stay;
      }
      cur[j] += emissions(t, column(j));
    }
    std::swap(prev, cur);
  }

  Alignment ali;
  ali.log_likelihood = prev[n - 1];
  if (!(ali.log_likelihood > kNegInf))
    throw NumericError("viterbi_align: no complete path");
  ali.phonemes.resize(t_len);
  ali.states.resize(t_len);
  ali.positions.resize(t_len);
  std::size_t j = n - 1;
  for (std::size_t t = t_len; t-- > 0;) {
    ali.phonemes[t] = transcription[j / s_per];
    ali.states[t] = static_cast<int>(j % s_per);
    ali.positions[t] = static_cast<int>(j / s_per);
    if (t > 0 && advanced[t][j]) --j;
  }
  std::vector<std::size_t> cuts;
  for (std::size_t t = 1; t < t_len; ++t)
    if (ali.positions[t] != ali.positions[t - 1]) cuts.push_back(t);
  ali.segmentation = Segmentation(t_len, std::move(cuts));
  return ali;
}

Alignment viterbi_align(const HmmSet &hmm, const Utterance &u,
                        const PhonemeSequence &transcription) {
  try {
    return viterbi_align_scores(hmm.topology, hmm.log_likelihoods(u),
                                transcription);
  } catch (const NumericError &e) {
    throw NumericError("utterance '" + u.id + "': " + e.what());
  }
}

namespace {

// Two-pass Gaussian statistics for a set of states.
class StateStats {
 public:
  StateStats(std::size_t n_states, std::size_t dim)
      : count_(n_states, 0.0), sum_(n_states, dim), sq_(n_states, dim) {}

  void add_mean(std::size_t j, std::span<const double> x) {
    count_[j] += 1.0;
    auto s = sum_.row(j);
    for (std::size_t k = 0; k < x.size(); ++k) s[k] += x[k];
  }
  void finish_means() {
    means_ = sum_;
    for (std::size_t j = 0; j < count_.size(); ++j)
      if (count_[j] > 0)
        for (double &v : means_.row(j)) v /= count_[j];
  }
  void add_var(std::size_t j, std::span<const double> x) {
    auto q = sq_.row(j);
    auto mu = means_.row(j);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double d = x[k] - mu[k];
      q[k] += d * d;
    }
  }
  double count(std::size_t j) const { return count_[j]; }
  double mean(std::size_t j, std::size_t k) const { return means_(j, k); }
  double var(std::size_t j, std::size_t k) const { return sq_(j, k) / count_[j]; }

 private:
  std::vector<double> count_;
  Tensor2 sum_, sq_, means_;
};

void check_corpus(const std::vector<Utterance> &utts,
                  const std::vector<PhonemeSequence> &trans, int num_phonemes) {
  if (utts.empty()) throw ConfigError("HMM training: empty corpus");
  if (utts.size() != trans.size())
    throw ConfigError("HMM training: utterance/transcription count mismatch");
  for (std::size_t i = 0; i < utts.size(); ++i) {
    if (utts[i].dim() != utts[0].dim())
      throw ShapeError("HMM training: inconsistent feature dimensions");
    if (trans[i].empty())
      throw ConfigError("HMM training: empty transcription for '" + utts[i].id + "'");
    for (int p : trans[i])
      if (p < 0 || p >= num_phonemes)
        throw ConfigError("HMM training: phoneme id outside inventory");
  }
}

}  // namespace

HmmSet flat_start(const std::vector<Utterance> &utts,
                  const std::vector<PhonemeSequence> &transcriptions,
                  const HmmOptions &opts, FlatStartReport *report) {
  HmmTopology topo{opts.num_phonemes, opts.states_per_phoneme, opts.self_loop};
  topo.validate();
  check_corpus(utts, transcriptions, opts.num_phonemes);
  const std::size_t d = utts[0].dim();
  const int s_per = topo.states_per_phoneme;
  const std::size_t n_states = topo.num_states();

  // Global statistics, also the source of the variance floor.
  StateStats global(1, d), phone(opts.num_phonemes, d), state(n_states, d);
  auto visit = [&](auto &&fn) {
    for (std::size_t u = 0; u < utts.size(); ++u) {
      const auto &tr = transcriptions[u];
      const std::size_t t_len = utts[u].num_frames(), len = tr.size();
      for (std::size_t l = 0; l < len; ++l) {
        const std::size_t a = l * t_len / len, b = (l + 1) * t_len / len;
        for (std::size_t t = a; t < b; ++t) {
          const std::size_t s = (t - a) * s_per / (b - a);
          fn(utts[u].features.row(t), tr[l], static_cast<int>(s));
        }
      }
    }
  };
  visit([&](auto x, int p, int s) {
    global.add_mean(0, x);
    phone.add_mean(p, x);
    state.add_mean(topo.state_index(p, s), x);
  });
  global.finish_means();
  phone.finish_means();
  state.finish_means();
  visit([&](auto x, int p, int s) {
    global.add_var(0, x);
    phone.add_var(p, x);
    state.add_var(topo.state_index(p, s), x);
  });

  HmmSet h;
  h.topology = topo;
  h.variance_floor.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double gv = global.var(0, k);
    h.variance_floor[k] = opts.floor_scale * (gv > 0.0 ? gv : 1.0);
  }
  h.means = Tensor2(n_states, d);
  h.variances = Tensor2(n_states, d);
  FlatStartReport rep;
  for (int p = 0; p < topo.num_phonemes; ++p) {
    if (phone.count(p) == 0) rep.unseen_phonemes.push_back(p);
    for (int s = 0; s < s_per; ++s) {
      const std::size_t j = topo.state_index(p, s);
      const StateStats *src = &state;
      std::size_t row = j;
      if (state.count(j) == 0) {
        src = phone.count(p) > 0 ? &phone : &global;
        row = phone.count(p) > 0 ? p : 0;
      }
      for (std::size_t k = 0; k < d; ++k) {
        h.means(j, k) = src->mean(row, k);
        h.variances(j, k) = std::max(src->var(row, k), h.variance_floor[k]);
      }
    }
  }
  if (report) *report = rep;
  return h;
}

HmmSet reestimate(const HmmSet &hmm, const std::vector<Utterance> &utts,
                  const std::vector<Alignment> &alignments) {
  if (utts.size() != alignments.size())
    throw ConfigError("reestimate: utterance/alignment count mismatch");
  const auto &topo = hmm.topology;
  const std::size_t d = hmm.dim();
  StateStats stats(topo.num_states(), d);
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t u = 0; u < utts.size(); ++u) {
      const auto &ali = alignments[u];
      if (ali.phonemes.size() != utts[u].num_frames())
        throw ShapeError("reestimate: alignment length differs for '" +
                         utts[u].id + "'");
      for (std::size_t t = 0; t < ali.phonemes.size(); ++t) {
        const std::size_t j = topo.state_index(ali.phonemes[t], ali.states[t]);
        if (pass == 0)
          stats.add_mean(j, utts[u].features.row(t));
        else
          stats.add_var(j, utts[u].features.row(t));
      }
    }
    if (pass == 0) stats.finish_means();
  }
  HmmSet out = hmm;
  for (int j = 0; j < topo.num_states(); ++j) {
    if (stats.count(j) == 0) continue;
    for (std::size_t k = 0; k < d; ++k) {
      out.means(j, k) = stats.mean(j, k);
      out.variances(j, k) = std::max(stats.var(j, k), hmm.variance_floor[k]);
    }
  }
  return out;
}

HmmSet train_hmm(const std::vector<Utterance> &utts,
                 const std::vector<PhonemeSequence> &transcriptions,
                 const HmmOptions &opts, int n_iters, HmmTrainTrace *trace) {
  if (n_iters < 0) throw ConfigError("train_hmm: negative iteration count");
  HmmTrainTrace local;
  HmmSet h = flat_start(utts, transcriptions, opts, &local.flat_start);
  auto align_all = [&](const HmmSet &model, double *total) {
    std::vector<Alignment> out;
    out.reserve(utts.size());
    *total = 0.0;
    for (std::size_t u = 0; u < utts.size(); ++u) {
      out.push_back(viterbi_align(model, utts[u], transcriptions[u]));
      *total += out.back().log_likelihood;
    }
    return out;
  };
  for (int it = 0; it < n_iters; ++it) {
    double total = 0.0;
    auto alignments = align_all(h, &total);
    local.total_log_likelihood.push_back(total);
    h = reestimate(h, utts, alignments);
  }
  if (trace) {
    double total = 0.0;
    align_all(h, &total);
    local.total_log_likelihood.push_back(total);
    *trace = std::move(local);
  }
  return h;
}

}  // namespace uasr
