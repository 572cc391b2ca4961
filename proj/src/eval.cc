// src/eval.cc

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

#include "uasr/eval.h"

#include <algorithm>
#include <sstream>

#include "uasr/common.h"
#include "uasr/io.h"

namespace uasr {

PhonemeSequence map_classes(const PhonemeSequence &seq,
                            const PhonemeInventory &inv) {
  PhonemeSequence out;
  out.reserve(seq.size());
  for (int p : seq) {
    if (p < 0 || p >= inv.size())
      throw ConfigError("map_classes: id " + std::to_string(p) +
                        " outside the inventory");
    out.push_back(inv.score_id(p));
  }
  return out;
}

EditCounts &EditCounts::operator+=(const EditCounts &o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_length += o.ref_length;
  return *this;
}

EditCounts align_edits(const PhonemeSequence &hyp, const PhonemeSequence &ref,
                       std::map<std::pair<int, int>, std::size_t> *confusions) {
  const std::size_t n = ref.size(), m = hyp.size();
  // cost[i][j]: distance between ref[0, i) and hyp[0, j).
  std::vector<std::vector<std::size_t>> cost(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) cost[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) cost[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      cost[i][j] = std::min({cost[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]),
                             cost[i - 1][j] + 1, cost[i][j - 1] + 1});
  EditCounts c;
  c.ref_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        cost[i][j] == cost[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])) {
      if (ref[i - 1] != hyp[j - 1]) {
        ++c.substitutions;
        if (confusions) ++(*confusions)[{ref[i - 1], hyp[j - 1]}];
      }
      --i;
      --j;
    } else if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

PerResult phone_error_rate(const PhonemeSequence &hyp, const PhonemeSequence &ref,
                           const PhonemeInventory &inv) {
  if (ref.empty()) throw ConfigError("phone_error_rate: empty reference");
  PerResult r;
  r.counts = align_edits(map_classes(hyp, inv), map_classes(ref, inv));
  r.per = static_cast<double>(r.counts.distance()) / r.counts.ref_length;
  return r;
}

PerResult corpus_phone_error_rate(const std::vector<PhonemeSequence> &hyp,
                                  const std::vector<PhonemeSequence> &ref,
                                  const PhonemeInventory &inv) {
  if (hyp.size() != ref.size())
    throw ConfigError("phone_error_rate: hypothesis/reference count mismatch");
  PerResult r;
  for (std::size_t i = 0; i < ref.size(); ++i)
    r.counts += align_edits(map_classes(hyp[i], inv), map_classes(ref[i], inv));
  if (r.counts.ref_length == 0)
    throw ConfigError("phone_error_rate: empty reference");
  r.per = static_cast<double>(r.counts.distance()) / r.counts.ref_length;
  return r;
}

double frame_error_rate(const std::vector<std::vector<int>> &hyp_frames,
                        const std::vector<std::vector<int>> &ref_frames,
                        const PhonemeInventory &inv) {
  if (hyp_frames.size() != ref_frames.size())
    throw ConfigError("frame_error_rate: utterance count mismatch");
  std::size_t total = 0, wrong = 0;
  for (std::size_t u = 0; u < ref_frames.size(); ++u) {
    if (hyp_frames[u].size() != ref_frames[u].size())
      throw ShapeError("frame_error_rate: utterance " + std::to_string(u) +
                       " has " + std::to_string(hyp_frames[u].size()) +
                       " hypothesis frames and " +
                       std::to_string(ref_frames[u].size()) + " reference frames");
    const auto h = map_classes(hyp_frames[u], inv);
    const auto r = map_classes(ref_frames[u], inv);
    for (std::size_t t = 0; t < r.size(); ++t) wrong += h[t] != r[t];
    total += r.size();
  }
  if (total == 0) throw ConfigError("frame_error_rate: no frames");
  return static_cast<double>(wrong) / static_cast<double>(total);
}

EvalReport evaluate(const std::vector<PhonemeSequence> &hyp,
                    const std::vector<PhonemeSequence> &ref,
                    const std::vector<std::vector<int>> &hyp_frames,
                    const std::vector<std::vector<int>> &ref_frames,
                    const PhonemeInventory &inv) {
  if (hyp.size() != ref.size())
    throw ConfigError("evaluate: hypothesis/reference count mismatch");
  EvalReport rep;
  rep.num_utterances = ref.size();
  rep.num_classes = inv.score_size();
  for (std::size_t i = 0; i < ref.size(); ++i)
    rep.counts += align_edits(map_classes(hyp[i], inv), map_classes(ref[i], inv),
                              &rep.confusions);
  if (rep.counts.ref_length == 0) throw ConfigError("evaluate: empty reference");
  rep.per = static_cast<double>(rep.counts.distance()) / rep.counts.ref_length;
  if (!ref_frames.empty() || !hyp_frames.empty()) {
    rep.has_fer = true;
    rep.fer = frame_error_rate(hyp_frames, ref_frames, inv);
    for (const auto &f : ref_frames) rep.num_frames += f.size();
  }
  return rep;
}

std::string EvalReport::to_text(const PhonemeInventory &inv, std::size_t top) const {
  std::ostringstream out;
  if (has_fer) out << "fer\t" << format_double(fer) << '\n';
  out << "per\t" << format_double(per) << '\n'
      << "substitutions\t" << counts.substitutions << '\n'
      << "deletions\t" << counts.deletions << '\n'
      << "insertions\t" << counts.insertions << '\n'
      << "ref_tokens\t" << counts.ref_length << '\n'
      << "utterances\t" << num_utterances << '\n';
  if (has_fer) out << "frames\t" << num_frames << '\n';
  out << "classes\t" << num_classes << '\n';
  std::vector<std::pair<std::pair<int, int>, std::size_t>> sorted(confusions.begin(),
                                                                  confusions.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  out << "# confusions\n";
  for (std::size_t i = 0; i < sorted.size() && i < top; ++i)
    out << inv.score_symbol(sorted[i].first.first) << '\t'
        << inv.score_symbol(sorted[i].first.second) << '\t' << sorted[i].second
        << '\n';
  return out.str();
}

}  // namespace uasr
