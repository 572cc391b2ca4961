// src/decoder.cc

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

#include "uasr/decoder.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "uasr/common.h"

namespace uasr {

void DecodeConfig::validate() const {
  if (!std::isfinite(lm_weight) || lm_weight < 0.0)
    throw ConfigError("decode: lm_weight must be finite and >= 0");
  if (std::isnan(beam) || beam < 1.0)
    throw ConfigError("decode: beam must be >= 1");
  if (!std::isfinite(insertion_penalty))
    throw ConfigError("decode: insertion_penalty must be finite");
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// One entered phoneme on some path.
struct Trace {
  int phoneme;
  std::size_t start;
  int prev;
};

struct Token {
  double score = kNegInf;
  int trace = -1;
  // Set when the token entered a new phoneme this frame; the trace entry is
  // only materialized for the surviving candidate.
  bool entered = false;
  int prev_trace = -1;
};

// LM history after a phoneme, the phoneme, its state.
using Key = std::tuple<std::vector<int>, int, int>;

}  // namespace

DecodeResult decode_viterbi_lm_scores(const HmmTopology &topo,
                                      const Tensor2 &emissions,
                                      const NGramLm &lm,
                                      const DecodeConfig &cfg) {
  topo.validate();
  cfg.validate();
  if (lm.num_phonemes() != topo.num_phonemes)
    throw ConfigError("decode: LM and HMM inventories differ");
  if (emissions.cols() != static_cast<std::size_t>(topo.num_states()))
    throw ShapeError("decode: emission matrix has wrong state count");
  const std::size_t t_len = emissions.rows();
  if (t_len == 0) throw ShapeError("decode: empty utterance");

  const int m = topo.num_phonemes, s_last = topo.states_per_phoneme - 1;
  const std::size_t keep = static_cast<std::size_t>(lm.order() - 1);
  const double l_self = topo.log_self(), l_adv = topo.log_advance();
  auto extend = [&](const std::vector<int> &h, int p) {
    std::vector<int> out = h;
    out.push_back(p);
    if (out.size() > keep) out.erase(out.begin(), out.end() - keep);
    return out;
  };

  std::vector<Trace> arena;
  std::map<Key, Token> cur, next;
  auto relax = [&](std::map<Key, Token> &dst, Key key, const Token &cand) {
    auto [it, inserted] = dst.try_emplace(std::move(key), cand);
    if (!inserted && cand.score > it->second.score) it->second = cand;
  };
  auto enter_all = [&](std::map<Key, Token> &dst, const std::vector<int> &hist,
                       double base, int prev, std::size_t t) {
    for (int q = 0; q < m; ++q) {
      Token tok;
      tok.score = base + cfg.lm_weight * lm.log_prob(hist, q) +
                  cfg.insertion_penalty + emissions(t, topo.state_index(q, 0));
      tok.entered = true;
      tok.prev_trace = prev;
      relax(dst, Key{extend(hist, q), q, 0}, tok);
    }
  };
  auto settle = [&](std::map<Key, Token> &tokens, std::size_t t) {
    double best = kNegInf;
    for (const auto &kv : tokens) best = std::max(best, kv.second.score);
    for (auto it = tokens.begin(); it != tokens.end();) {
      if (!(it->second.score >= best - cfg.beam)) {
        it = tokens.erase(it);
        continue;
      }
      auto &tok = it->second;
      if (tok.entered) {
        arena.push_back({std::get<1>(it->first), t, tok.prev_trace});
        tok.trace = static_cast<int>(arena.size()) - 1;
        tok.entered = false;
      }
      ++it;
    }
  };

  enter_all(cur, std::vector<int>(keep > 0 ? 1 : 0, lm.start_token()), 0.0, -1, 0);
  settle(cur, 0);
  for (std::size_t t = 1; t < t_len; ++t) {
    next.clear();
    for (const auto &[key, tok] : cur) {
      const auto &[hist, p, s] = key;
      Token stay{tok.score + l_self + emissions(t, topo.state_index(p, s)),
                 tok.trace};
      relax(next, key, stay);
      if (s < s_last) {
        Token adv{tok.score + l_adv + emissions(t, topo.state_index(p, s + 1)),
                  tok.trace};
        relax(next, Key{hist, p, s + 1}, adv);
      } else {
        enter_all(next, hist, tok.score + l_adv, tok.trace, t);
      }
    }
    std::swap(cur, next);
    settle(cur, t);
  }

  double best = kNegInf;
  int best_trace = -1;
  for (const auto &[key, tok] : cur) {
    if (std::get<2>(key) != s_last) continue;
    const double sc =
        tok.score + cfg.lm_weight * lm.log_prob(std::get<0>(key), lm.end_token());
    if (sc > best) {
      best = sc;
      best_trace = tok.trace;
    }
  }
  if (best_trace < 0)
    throw NumericError("decode: no complete path (utterance of " +
                       std::to_string(t_len) + " frames)");

  DecodeResult res;
  res.score = best;
  std::vector<std::size_t> starts;
  for (int i = best_trace; i >= 0; i = arena[i].prev) {
    res.phonemes.push_back(arena[i].phoneme);
    starts.push_back(arena[i].start);
  }
  std::reverse(res.phonemes.begin(), res.phonemes.end());
  std::reverse(starts.begin(), starts.end());
  res.segmentation =
      Segmentation(t_len, std::vector<std::size_t>(starts.begin() + 1, starts.end()));
  return res;
}

PhonemeSequence decode_viterbi_lm(const HmmSet &hmm, const NGramLm &lm,
                                  const Utterance &u, const DecodeConfig &cfg) {
  try {
    return decode_viterbi_lm_scores(hmm.topology, hmm.log_likelihoods(u), lm, cfg)
        .phonemes;
  } catch (const NumericError &e) {
    throw NumericError("utterance '" + u.id + "': " + e.what());
  }
}

}  // namespace uasr
