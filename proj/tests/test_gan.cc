// tests/test_gan.cc

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
#include <set>
#include <utility>

#include "doctest.h"
#include "oracles.h"
#include "uasr/gan.h"

using namespace uasr;

namespace {

Discriminator small_critic(int m, Rng &rng) {
  return Discriminator::init(m, {3, 5, 7, 9}, 4, {3}, 6, rng);
}

// Random distribution rows, the shape of generator output.
Tensor2 random_simplex_rows(std::size_t n, int m, Rng &rng) {
  Tensor2 t(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (int c = 0; c < m; ++c) s += t(r, c) = 0.1 + rng.uniform();
    for (int c = 0; c < m; ++c) t(r, c) /= s;
  }
  return t;
}

Utterance random_utterance(const std::string &id, std::size_t frames, std::size_t dim,
                           Rng &rng) {
  Utterance u{id, Tensor2(frames, dim)};
  for (double &v : u.features.data()) v = rng.normal();
  return u;
}

}  // namespace

TEST_CASE("critic value and input gradient match the direct computation") {
  Rng rng(11);
  const Discriminator d = small_critic(3, rng);
  const Tensor2 p = random_simplex_rows(7, 3, rng);
  const CriticPass pass = critic_forward(d, p, 7);
  const oracle::Critic ref = oracle::critic(d, oracle::to_mat(p), 7);
  CHECK(pass.value == doctest::Approx(ref.value).epsilon(1e-12));
  const Tensor2 g = critic_backward(d, pass, 1.0, nullptr);
  for (std::size_t t = 0; t < 7; ++t)
    for (int c = 0; c < 3; ++c) CHECK(g(t, c) == doctest::Approx(ref.input_grad[t][c]).epsilon(1e-10));
}

TEST_CASE("critic ignores rows past the valid length") {
  Rng rng(12);
  const Discriminator d = small_critic(4, rng);
  const Tensor2 p = random_simplex_rows(5, 4, rng);
  const double base = discriminate(d, pad_rows(p, 5), 5);
  Tensor2 padded = pad_rows(p, 9);
  CHECK(discriminate(d, padded, 5) == doctest::Approx(base).epsilon(1e-14));
  for (std::size_t t = 5; t < 9; ++t)
    for (int c = 0; c < 4; ++c) padded(t, c) = rng.normal();
  CHECK(discriminate(d, padded, 5) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("pad_rows rejects sequences longer than the target") {
  CHECK_THROWS_AS(pad_rows(Tensor2(4, 2), 3), ShapeError);
}

TEST_CASE("discriminator loss matches the oracle, including mixed lengths") {
  Rng rng(13);
  const int m = 3;
  const Discriminator d = small_critic(m, rng);
  std::vector<Tensor2> gen, real;
  std::vector<oracle::Mat> gen_m, real_m;
  const std::size_t gl[] = {4, 6, 2}, rl[] = {5, 3, 6};
  for (int i = 0; i < 3; ++i) {
    gen.push_back(random_simplex_rows(gl[i], m, rng));
    real.push_back(one_hot_rows(PhonemeSequence(rl[i], i % m), m));
    gen_m.push_back(oracle::to_mat(gen.back()));
    real_m.push_back(oracle::to_mat(real.back()));
  }
  const std::vector<double> u{0.2, 0.7, 0.5};
  const DiscriminatorLoss loss = discriminator_loss(d, gen, real, 10.0, u, 8, nullptr);
  const double ref = oracle::discriminator_loss(d, gen_m, real_m, 10.0, u, 8);
  CHECK(loss.value == doctest::Approx(ref).epsilon(1e-10));
  CHECK(loss.value ==
        doctest::Approx(loss.mean_gen - loss.mean_real + 10.0 * loss.penalty).epsilon(1e-12));
}

TEST_CASE("discriminator loss gradient agrees with finite differences") {
  Rng rng(14);
  const int m = 3;
  Discriminator d = small_critic(m, rng);
  std::vector<Tensor2> gen, real;
  for (std::size_t n : {3, 5, 6}) {
    gen.push_back(random_simplex_rows(n, m, rng));
    real.push_back(random_simplex_rows(n + 1 > 6 ? 6 : n + 1, m, rng));
  }
  const std::vector<double> u{0.3, 0.6, 0.9};
  std::vector<Tensor2> grads = zeros_like(std::as_const(d).params());
  discriminator_loss(d, gen, real, 10.0, u, 7, &grads);
  auto loss = [&] { return discriminator_loss(d, gen, real, 10.0, u, 7, nullptr).value; };
  const GradCheckReport rep = gradient_check(loss, d.params(), grads, 1e-4);
  INFO("worst param " << rep.worst_param << " entry " << rep.worst_entry << " analytic "
                      << rep.worst_analytic << " numeric " << rep.worst_numeric);
  CHECK(rep.passed);
}

TEST_CASE("gradient penalty is zero for a unit-norm critic gradient") {
  // One input channel, one width-1 filter per layer, positive weights: the
  // critic is affine in the input with gradient w1*w2*w/n per entry.
  Discriminator d;
  d.layer1.in_channels = 1;
  d.layer1.banks.push_back({1, Tensor2{{2.0}}, Tensor2{{1.0}}});
  d.layer2.in_channels = 1;
  d.layer2.banks.push_back({1, Tensor2{{1.0}}, Tensor2{{0.0}}});
  d.head_weight = Tensor2{{0.5}};
  d.head_bias = Tensor2{{0.0}};
  // n = 4 rows: each entry of the gradient is 2*1*0.5/4 = 0.25, norm 0.5.
  const Tensor2 p{{1.0}, {1.0}, {1.0}, {1.0}};
  CHECK(penalty_term(d, p, 4, 1.0, nullptr) == doctest::Approx(0.25));
  // Scaling the head by 2 gives norm 1.
  d.head_weight = Tensor2{{1.0}};
  CHECK(penalty_term(d, p, 4, 1.0, nullptr) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("intra-segment loss and pair sampling") {
  const Tensor2 y{{1, 0}, {0, 1}, {0.5, 0.5}};
  const std::vector<std::vector<FramePair>> pairs{{{0, 1}, {1, 2}}};
  std::vector<Tensor2> grads;
  // (1 + 1) + (0.25 + 0.25) over a batch of one.
  CHECK(intra_segment_loss({y}, pairs, &grads) == doctest::Approx(2.5));
  CHECK(grads[0](0, 0) == doctest::Approx(2.0));
  CHECK(grads[0](2, 0) == doctest::Approx(1.0));

  Rng rng(15);
  const Segmentation s = Segmentation::from_lengths({1, 4, 2});
  const auto drawn = sample_intra_pairs(s, 6, rng);
  CHECK(drawn.size() == 12);  // the single-frame segment contributes nothing
  const auto owner = s.frame_owner();
  for (const auto &[i, j] : drawn) {
    CHECK(i != j);
    CHECK(owner[i] == owner[j]);
  }

  Rng rng2(16);
  std::vector<Tensor2> ys;
  std::vector<std::vector<FramePair>> ps;
  std::vector<oracle::Mat> ym;
  for (int b = 0; b < 3; ++b) {
    ys.push_back(random_simplex_rows(7, 4, rng2));
    ym.push_back(oracle::to_mat(ys.back()));
    ps.push_back(sample_intra_pairs(Segmentation::from_lengths({3, 4}), 6, rng2));
  }
  CHECK(intra_segment_loss(ys, ps, nullptr) ==
        doctest::Approx(oracle::intra_loss(ym, ps)).epsilon(1e-12));
}

TEST_CASE("generator loss matches the oracle") {
  Rng rng(17);
  const Discriminator d = small_critic(3, rng);
  std::vector<Tensor2> gen;
  std::vector<oracle::Mat> gm;
  for (std::size_t n : {2, 5, 4}) {
    gen.push_back(random_simplex_rows(n, 3, rng));
    gm.push_back(oracle::to_mat(gen.back()));
  }
  CHECK(generator_loss(d, gen, 0.8, 0.5, nullptr) ==
        doctest::Approx(oracle::generator_loss(d, gm, 0.8, 0.5)).epsilon(1e-12));
}

TEST_CASE("generator objective gradient agrees with finite differences") {
  Rng rng(18);
  const int m = 3;
  Generator g = Generator::init(2, m, {6}, 3, rng);
  const Discriminator d = small_critic(m, rng);
  std::vector<Utterance> utts;
  std::vector<Segmentation> segs{Segmentation::from_lengths({2, 3, 1}),
                                 Segmentation::from_lengths({4, 3})};
  utts.push_back(random_utterance("a", 6, 2, rng));
  utts.push_back(random_utterance("b", 7, 2, rng));
  GeneratorBatch batch;
  for (std::size_t b = 0; b < 2; ++b) {
    batch.utts.push_back(&utts[b]);
    batch.sampled.push_back(sample_segment_frames(segs[b], rng));
    batch.pairs.push_back(sample_intra_pairs(segs[b], 6, rng));
  }
  for (double lambda : {0.0, 0.5}) {
    std::vector<Tensor2> grads = zeros_like(std::as_const(g).params());
    generator_objective(g, d, batch, lambda, &grads);
    auto loss = [&] { return generator_objective(g, d, batch, lambda, nullptr); };
    const GradCheckReport rep = gradient_check(loss, g.params(), grads, 1e-5);
    INFO("lambda " << lambda << " worst " << rep.worst_analytic << " vs " << rep.worst_numeric);
    CHECK(rep.passed);
  }
}

TEST_CASE("segment sampling picks one frame inside each segment") {
  Rng rng(19);
  const Segmentation s = Segmentation::from_lengths({3, 1, 5});
  for (int rep = 0; rep < 20; ++rep) {
    const auto f = sample_segment_frames(s, rng);
    REQUIRE(f.size() == 3);
    for (std::size_t l = 0; l < 3; ++l) {
      CHECK(f[l] >= s.begin(l));
      CHECK(f[l] < s.end(l));
    }
  }
}

TEST_CASE("generator output rows are distributions and checkpoints round-trip") {
  Rng rng(20);
  const Generator g = Generator::init(3, 5, {8}, 5, rng);
  const Utterance u = random_utterance("x", 9, 3, rng);
  const Tensor2 y = classify_frames(g, u);
  REQUIRE(y.rows() == 9);
  for (std::size_t t = 0; t < 9; ++t) {
    double s = 0.0;
    for (double v : y.row(t)) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  const Generator back = Generator::from_checkpoint(
      deserialize_checkpoint(serialize_checkpoint(g.to_checkpoint())));
  CHECK(classify_frames(back, u) == y);

  const Discriminator d = small_critic(5, rng);
  const Discriminator d2 = Discriminator::from_checkpoint(d.to_checkpoint());
  const Tensor2 p = random_simplex_rows(6, 5, rng);
  CHECK(discriminate(d2, p, 6) == discriminate(d, p, 6));
}

TEST_CASE("context inputs replicate edge frames") {
  Utterance u{"e", Tensor2{{1.0}, {2.0}, {3.0}}};
  const std::vector<std::size_t> frames{0, 2};
  const Tensor2 x = context_inputs(u, frames, 3);
  CHECK(x == Tensor2{{1.0, 1.0, 2.0}, {2.0, 3.0, 3.0}});
}

TEST_CASE("segment vote ties go to the lower phoneme id") {
  const Tensor2 y{{0.6, 0.4}, {0.4, 0.6}, {0.1, 0.9}, {0.9, 0.1}};
  // Segment 1: frames 0-1 vote 0 and 1 (tie), segment 2: 1 and 0 (tie).
  const PhonemeSequence out = infer_segment_vote(y, Segmentation::from_lengths({2, 2}));
  CHECK(out == PhonemeSequence{0, 0});
}

TEST_CASE("max length percentile uses the nearest rank") {
  std::vector<PhonemeSequence> seqs;
  for (std::size_t n = 1; n <= 20; ++n) seqs.push_back(PhonemeSequence(n, 0));
  CHECK(length_percentile(seqs, 95.0) == 19);
  CHECK(length_percentile(seqs, 100.0) == 20);
}

TEST_CASE("training is deterministic under a fixed seed") {
  SyntheticParams sp;
  sp.num_phonemes = 3;
  sp.dim = 2;
  sp.utterance_count = 12;
  sp.mean_utterance_length = 4;
  const SyntheticSpec spec = make_synthetic_spec(sp, 5);
  const SyntheticCorpus c = generate_synthetic_corpus(spec, 6);
  TextCorpus text{c.transcriptions};
  GanConfig cfg;
  cfg.hidden = {8};
  cfg.context_window = 3;
  cfg.d_channels1 = 4;
  cfg.d_channels2 = 6;
  cfg.batch_size = 4;
  cfg.epochs = 2;
  cfg.seed = 99;
  GanTrace t1, t2;
  const GanModel a = train_gan(c.utterances, c.segmentations, text, text, 3, cfg, &t1);
  const GanModel b = train_gan(c.utterances, c.segmentations, text, text, 3, cfg, &t2);
  CHECK(a.generator.to_checkpoint() == b.generator.to_checkpoint());
  REQUIRE(t1.records.size() == t2.records.size());
  // 3 batches per epoch, 3 critic steps and 1 generator step per batch.
  CHECK(t1.records.size() == 2 * 3 * 4);
  for (std::size_t i = 0; i < t1.records.size(); ++i) CHECK(t1.records[i].value == t2.records[i].value);
}

TEST_CASE("length sampler returns exact lengths or windows of longer text") {
  const TextCorpus text{{{0, 1}, {2, 3, 4}, {5, 6, 7, 8, 9}, {1, 2}}};
  const LengthSampler all(text, {0, 1, 2, 3});
  Rng rng(81);
  std::set<PhonemeSequence> twos, fours;
  for (int i = 0; i < 200; ++i) {
    PhonemeSequence s;
    REQUIRE(all.draw(2, rng, &s));
    twos.insert(s);
    REQUIRE(all.draw(4, rng, &s));
    fours.insert(s);
  }
  // Length 2 exists, so no window of a longer sequence is used.
  CHECK(twos == std::set<PhonemeSequence>{{0, 1}, {1, 2}});
  // Length 4 only as windows of the single length-5 sequence.
  CHECK(fours == std::set<PhonemeSequence>{{5, 6, 7, 8}, {6, 7, 8, 9}});
  PhonemeSequence untouched{42};
  CHECK_FALSE(all.draw(6, rng, &untouched));
  CHECK(untouched == PhonemeSequence{42});
  // Only indexed sequences take part.
  const LengthSampler some(text, {1});
  PhonemeSequence s;
  REQUIRE(some.draw(2, rng, &s));
  CHECK((s == PhonemeSequence{2, 3} || s == PhonemeSequence{3, 4}));
}
