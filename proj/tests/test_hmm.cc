// tests/test_hmm.cc

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

#include <cmath>

#include "doctest.h"
#include "uasr/common.h"
#include "oracles.h"
#include "uasr/hmm.h"

using namespace uasr;

namespace {

Tensor2 random_emissions(std::size_t t_len, int states, Rng &rng) {
  Tensor2 e(t_len, states);
  for (double &v : e.data()) v = 3.0 * rng.normal();
  return e;
}

// Score of a given per-frame chain-position path.
double path_score(const HmmTopology &topo, const Tensor2 &em,
                  const PhonemeSequence &trans, const Alignment &a) {
  double s = 0.0;
  for (std::size_t t = 0; t < em.rows(); ++t) {
    s += em(t, topo.state_index(a.phonemes[t], a.states[t]));
    if (t == 0) continue;
    const int prev = a.positions[t - 1] * topo.states_per_phoneme + a.states[t - 1];
    const int cur = a.positions[t] * topo.states_per_phoneme + a.states[t];
    s += cur == prev ? topo.log_self() : topo.log_advance();
  }
  (void)trans;
  return s;
}

}  // namespace

TEST_CASE("forced alignment matches exhaustive enumeration") {
  Rng rng(31);
  int mismatches = 0, checked = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const int m = 1 + static_cast<int>(rng.uniform_int(2));
    const int s = 1 + static_cast<int>(rng.uniform_int(2));
    const HmmTopology topo{m, s, 0.5 + 0.45 * rng.uniform()};
    const std::size_t t_len = 1 + rng.uniform_int(8);
    PhonemeSequence trans(1 + rng.uniform_int(3));
    for (int &p : trans) p = static_cast<int>(rng.uniform_int(m));
    const Tensor2 em = random_emissions(t_len, topo.num_states(), rng);
    const double best = oracle::brute_force_align(topo, em, trans);
    if (!std::isfinite(best)) {
      CHECK_FALSE(alignable(topo, t_len, trans));
      CHECK_THROWS_AS(viterbi_align_scores(topo, em, trans), NumericError);
      continue;
    }
    ++checked;
    const Alignment a = viterbi_align_scores(topo, em, trans);
    if (std::abs(a.log_likelihood - best) > 1e-9) ++mismatches;
    CHECK(path_score(topo, em, trans, a) == doctest::Approx(a.log_likelihood).epsilon(1e-12));
    CHECK(a.segmentation.num_segments() == trans.size());
    CHECK(a.segmentation.num_frames() == t_len);
  }
  CHECK(checked > 50);
  CHECK(mismatches == 0);
}

TEST_CASE("alignment with a single state is one segment per phoneme") {
  const HmmTopology topo{2, 1, 0.9};
  // Frames clearly favour 0,0,1,1,1.
  const Tensor2 em{{0, -9}, {0, -9}, {-9, 0}, {-9, 0}, {-9, 0}};
  const Alignment a = viterbi_align_scores(topo, em, {0, 1});
  CHECK(a.segmentation == Segmentation::from_lengths({2, 3}));
  CHECK(a.phonemes == std::vector<int>{0, 0, 1, 1, 1});
}

TEST_CASE("unalignable transcriptions are reported") {
  const HmmTopology topo{3, 3, 0.95};
  CHECK(alignable(topo, 6, {0, 1}));
  CHECK_FALSE(alignable(topo, 5, {0, 1}));
  HmmSet hmm;
  hmm.topology = topo;
  hmm.means = Tensor2(9, 1);
  hmm.variances = Tensor2(9, 1, 1.0);
  hmm.variance_floor = {1e-3};
  const Utterance u{"short", Tensor2(5, 1)};
  try {
    viterbi_align(hmm, u, {0, 1});
    FAIL("expected NumericError");
  } catch (const NumericError &e) {
    CHECK(std::string(e.what()).find("short") != std::string::npos);
  }
}

TEST_CASE("Gaussian log-likelihoods match the closed form") {
  HmmSet hmm;
  hmm.topology = {1, 1, 0.9};
  hmm.means = Tensor2{{1.0, -1.0}};
  hmm.variances = Tensor2{{2.0, 0.5}};
  hmm.variance_floor = {1e-3, 1e-3};
  const Utterance u{"g", Tensor2{{0.0, 0.0}}};
  const double ref = -0.5 * (std::log(2 * M_PI * 2.0) + 1.0 / 2.0) -
                     0.5 * (std::log(2 * M_PI * 0.5) + 1.0 / 0.5);
  CHECK(hmm.log_likelihoods(u)(0, 0) == doctest::Approx(ref).epsilon(1e-12));
}

namespace {

struct ToyCorpus {
  std::vector<Utterance> utts;
  std::vector<PhonemeSequence> trans;
};

ToyCorpus toy_corpus(int n_utts, uint64_t seed) {
  SyntheticParams sp;
  sp.num_phonemes = 4;
  sp.dim = 3;
  sp.utterance_count = n_utts;
  sp.mean_utterance_length = 6;
  sp.separation = 2.0;
  const SyntheticCorpus c = generate_synthetic_corpus(make_synthetic_spec(sp, seed), seed + 1);
  return {c.utterances, c.transcriptions};
}

}  // namespace

TEST_CASE("Viterbi training never lowers the alignment likelihood") {
  const ToyCorpus c = toy_corpus(100, 41);
  HmmTrainTrace trace;
  const HmmOptions opts{4, 3, 0.95, 1e-3};
  train_hmm(c.utts, c.trans, opts, 10, &trace);
  REQUIRE(trace.total_log_likelihood.size() == 11);
  for (std::size_t i = 1; i < trace.total_log_likelihood.size(); ++i)
    CHECK(trace.total_log_likelihood[i] >= trace.total_log_likelihood[i - 1] - 1e-8);
}

TEST_CASE("flat start splits frames evenly and honours the variance floor") {
  // One utterance, phoneme 0 over 6 frames, 3 states: two frames each.
  const Utterance u{"f", Tensor2{{0.0}, {2.0}, {4.0}, {4.0}, {10.0}, {12.0}}};
  const HmmOptions opts{2, 3, 0.95, 1e-3};
  FlatStartReport rep;
  const HmmSet hmm = flat_start({u}, {{0}}, opts, &rep);
  CHECK(hmm.means(0, 0) == doctest::Approx(1.0));
  CHECK(hmm.means(1, 0) == doctest::Approx(4.0));
  CHECK(hmm.means(2, 0) == doctest::Approx(11.0));
  // State 1 saw two identical frames: variance sits on the floor.
  const double global_var = [&] {
    double m = 0, s = 0;
    for (std::size_t t = 0; t < 6; ++t) m += u.features(t, 0) / 6;
    for (std::size_t t = 0; t < 6; ++t) s += std::pow(u.features(t, 0) - m, 2) / 6;
    return s;
  }();
  CHECK(hmm.variance_floor[0] == doctest::Approx(1e-3 * global_var));
  CHECK(hmm.variances(1, 0) == doctest::Approx(1e-3 * global_var));
  CHECK(rep.unseen_phonemes == std::vector<int>{1});
  for (double v : hmm.variances.data()) CHECK(v > 0.0);
}

TEST_CASE("HMM text form round-trips") {
  const ToyCorpus c = toy_corpus(20, 43);
  const HmmSet hmm = train_hmm(c.utts, c.trans, {4, 3, 0.95, 1e-3}, 2);
  CHECK(HmmSet::from_text(hmm.to_text()) == hmm);
}
