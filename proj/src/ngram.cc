// src/ngram.cc

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

#include "uasr/ngram.h"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "uasr/common.h"
#include "uasr/io.h"

namespace uasr {

namespace {
const char *kBos = "<s>";
const char *kEos = "</s>";
}  // namespace

NGramLm train_ngram_lm(const TextCorpus &text, int num_phonemes, int order,
                       double discount) {
  if (order < 1) throw ConfigError("train_ngram_lm: order must be >= 1");
  if (num_phonemes < 1) throw ConfigError("train_ngram_lm: empty inventory");
  if (!(discount > 0.0 && discount < 1.0))
    throw ConfigError("train_ngram_lm: discount must be in (0, 1)");
  if (text.sequences.empty()) throw ConfigError("train_ngram_lm: empty corpus");
  text.validate(num_phonemes);

  NGramLm lm;
  lm.order_ = order;
  lm.num_phonemes_ = num_phonemes;
  lm.discount_ = discount;
  const int eos = lm.end_token(), bos = lm.start_token();

  std::map<std::vector<int>, std::map<int, double>> counts;
  for (const auto &seq : text.sequences) {
    std::vector<int> toks;
    toks.reserve(seq.size() + 2);
    toks.push_back(bos);
    toks.insert(toks.end(), seq.begin(), seq.end());
    toks.push_back(eos);
    for (std::size_t i = 1; i < toks.size(); ++i)
      for (int k = 1; k <= order && static_cast<int>(i) - k + 1 >= 0; ++k) {
        std::vector<int> hist(toks.begin() + (i - k + 1), toks.begin() + i);
        counts[hist][toks[i]] += 1.0;
      }
  }

  // Lower orders first: each level interpolates with the one below.
  const double vocab = static_cast<double>(lm.vocab_size());
  for (int len = 0; len < order; ++len) {
    for (const auto &[hist, succ] : counts) {
      if (static_cast<int>(hist.size()) != len) continue;
      double total = 0.0;
      for (const auto &kv : succ) total += kv.second;
      const double distinct = static_cast<double>(succ.size());
      const double gamma = discount * distinct / total;
      NGramLm::Context ctx;
      ctx.log_backoff = std::log(gamma);
      if (len == 0) {
        for (int w = 0; w < lm.vocab_size(); ++w) {
          auto it = succ.find(w);
          const double c = it == succ.end() ? 0.0 : it->second;
          ctx.log_probs[w] =
              std::log(std::max(c - discount, 0.0) / total + gamma / vocab);
        }
      } else {
        std::vector<int> lower(hist.begin() + 1, hist.end());
        for (const auto &[w, c] : succ) {
          const double p = std::max(c - discount, 0.0) / total +
                           gamma * lm.prob(lower, w);
          ctx.log_probs[w] = std::log(p);
        }
      }
      lm.contexts_.emplace(hist, std::move(ctx));
    }
  }
  return lm;
}

double NGramLm::log_prob(std::span<const int> history, int token) const {
  if (order_ == 0) throw Error("NGramLm: model not trained");
  if (token < 0 || token >= vocab_size())
    throw Error("NGramLm: token outside vocabulary");
  const std::size_t keep = static_cast<std::size_t>(order_ - 1);
  if (history.size() > keep) history = history.subspan(history.size() - keep);
  double backoff = 0.0;
  while (true) {
    auto it = contexts_.find(std::vector<int>(history.begin(), history.end()));
    if (it != contexts_.end()) {
      auto p = it->second.log_probs.find(token);
      if (p != it->second.log_probs.end()) return backoff + p->second;
      backoff += it->second.log_backoff;
    }
    // The empty context stores every token, so history is non-empty here.
    history = history.subspan(1);
  }
}

double NGramLm::prob(std::span<const int> history, int token) const {
  return std::exp(log_prob(history, token));
}

std::vector<std::vector<int>> NGramLm::contexts() const {
  std::vector<std::vector<int>> out;
  for (const auto &kv : contexts_) out.push_back(kv.first);
  return out;
}

double NGramLm::sequence_log_prob(const PhonemeSequence &seq) const {
  std::vector<int> hist{start_token()};
  double lp = 0.0;
  for (int p : seq) {
    lp += log_prob(hist, p);
    hist.push_back(p);
  }
  return lp + log_prob(hist, end_token());
}

std::string NGramLm::to_text(const PhonemeInventory &inv) const {
  if (inv.size() != num_phonemes_)
    throw ConfigError("NGramLm::to_text: inventory size mismatch");
  auto sym = [&](int t) -> std::string {
    if (t == end_token()) return kEos;
    if (t == start_token()) return kBos;
    return inv.symbol(t);
  };
  std::ostringstream out;
  out << "ngram\t" << order_ << '\t' << num_phonemes_ << '\t'
      << format_double(discount_) << '\n';
  for (const auto &[hist, ctx] : contexts_) {
    std::string h;
    for (std::size_t i = 0; i < hist.size(); ++i)
      h += (i ? " " : "") + sym(hist[i]);
    if (h.empty()) h = "-";
    // The start marker is a context but never predicted; ARPA-style, give
    // it a pseudo-entry carrying its backoff weight.
    if (hist.empty()) {
      auto bos_ctx = contexts_.find(std::vector<int>{start_token()});
      out << "-\t" << kBos << "\t-inf\t"
          << format_double(bos_ctx == contexts_.end() ? 0.0
                                                      : bos_ctx->second.log_backoff)
          << '\n';
    }
    for (const auto &[w, lp] : ctx.log_probs) {
      std::vector<int> ext = hist;
      ext.push_back(w);
      auto child = contexts_.find(ext);
      const double bo = child == contexts_.end() ? 0.0 : child->second.log_backoff;
      out << h << '\t' << sym(w) << '\t' << format_double(lp) << '\t'
          << format_double(bo) << '\n';
    }
  }
  return out.str();
}

NGramLm NGramLm::from_text(const std::string &text, const PhonemeInventory &inv) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string &why) {
    throw ParseError("LM line " + std::to_string(line_no) + ": " + why);
  };
  auto num = [&](const std::string &s) {
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail("bad number '" + s + "'");
    return v;
  };
  auto split_tab = [](const std::string &l) {
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      auto pos = l.find('\t', start);
      f.push_back(l.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return f;
  };

  NGramLm lm;
  if (!std::getline(in, line)) throw ParseError("LM: empty file");
  ++line_no;
  auto hdr = split_tab(line);
  if (hdr.size() != 4 || hdr[0] != "ngram") fail("bad header");
  lm.order_ = std::stoi(hdr[1]);
  lm.num_phonemes_ = std::stoi(hdr[2]);
  lm.discount_ = num(hdr[3]);
  if (lm.num_phonemes_ != inv.size()) fail("inventory size mismatch");
  auto tok = [&](const std::string &s) {
    if (s == kEos) return lm.end_token();
    if (s == kBos) return lm.start_token();
    if (!inv.contains(s)) fail("unknown symbol '" + s + "'");
    return inv.id(s);
  };

  std::map<std::vector<int>, double> backoffs;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_tab(line);
    if (f.size() != 4) fail("expected 4 tab-separated fields");
    std::vector<int> hist;
    if (f[0] != "-") {
      std::istringstream hs(f[0]);
      std::string s;
      while (hs >> s) hist.push_back(tok(s));
    }
    const int w = tok(f[1]);
    std::vector<int> ext = hist;
    ext.push_back(w);
    const double bo = num(f[3]);
    if (w == lm.start_token()) {
      if (bo != 0.0) backoffs[ext] = bo;
      continue;
    }
    lm.contexts_[hist].log_probs[w] = num(f[2]);
    if (bo != 0.0) backoffs[ext] = bo;
  }
  for (const auto &[ctx, bo] : backoffs) lm.contexts_[ctx].log_backoff = bo;
  if (!lm.contexts_.count({})) throw ParseError("LM: missing unigram entries");
  return lm;
}

}  // namespace uasr
