// tests/test_eval.cc

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

#include "doctest.h"
#include "uasr/common.h"
#include "oracles.h"
#include "uasr/eval.h"

using namespace uasr;

TEST_CASE("edit distance matches the quadratic recurrence") {
  Rng rng(61);
  const PhonemeInventory inv({"a", "b", "c", "d"});
  for (int i = 0; i < 1000; ++i) {
    PhonemeSequence hyp(rng.uniform_int(12)), ref(1 + rng.uniform_int(12));
    for (int &p : hyp) p = static_cast<int>(rng.uniform_int(4));
    for (int &p : ref) p = static_cast<int>(rng.uniform_int(4));
    const PerResult r = phone_error_rate(hyp, ref, inv);
    REQUIRE(r.counts.distance() == oracle::edit_distance(hyp, ref));
    CHECK(r.counts.ref_length == ref.size());
    CHECK(r.per == doctest::Approx(static_cast<double>(r.counts.distance()) / ref.size()));
    // Deletions minus insertions is fixed by the lengths.
    CHECK(static_cast<long>(r.counts.deletions) - static_cast<long>(r.counts.insertions) ==
          static_cast<long>(ref.size()) - static_cast<long>(hyp.size()));
  }
}

TEST_CASE("phone error rate hand cases") {
  const PhonemeInventory inv({"a", "b", "c"});
  const PerResult r = phone_error_rate(inv.encode({"a", "c"}), inv.encode({"a", "b", "c"}), inv);
  CHECK(r.per == doctest::Approx(1.0 / 3.0));
  CHECK(r.counts.deletions == 1);
  CHECK(phone_error_rate({}, inv.encode({"a", "b"}), inv).per == doctest::Approx(1.0));
  CHECK(phone_error_rate(inv.encode({"a", "b", "c"}), inv.encode({"a"}), inv).per ==
        doctest::Approx(2.0));
  CHECK_THROWS(phone_error_rate({0}, {}, inv));
}

TEST_CASE("substitutions win traceback ties") {
  const EditCounts e = align_edits({1}, {0});
  CHECK(e.substitutions == 1);
  CHECK(e.deletions == 0);
  CHECK(e.insertions == 0);
}

TEST_CASE("corpus error rate pools edits over utterances") {
  const PhonemeInventory inv({"a", "b"});
  // 1 edit over 1 phone, 0 edits over 3 phones: pooled 1/4, not mean 1/2.
  const PerResult r = corpus_phone_error_rate({{1}, {0, 1, 0}}, {{0}, {0, 1, 0}}, inv);
  CHECK(r.per == doctest::Approx(0.25));
}

TEST_CASE("scoring map folds classes before comparison") {
  PhonemeInventory inv({"aa", "ao", "b"});
  inv.set_eval_map({{"aa", "aa"}, {"ao", "aa"}, {"b", "b"}});
  CHECK(phone_error_rate({1, 2}, {0, 2}, inv).per == doctest::Approx(0.0));
  CHECK(frame_error_rate({{0, 1, 2}}, {{1, 1, 0}}, inv) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("frame error rate pools frames and checks lengths") {
  const PhonemeInventory inv({"a", "b"});
  CHECK(frame_error_rate({{0, 0}, {1, 1, 1, 0}}, {{0, 1}, {1, 1, 1, 1}}, inv) ==
        doctest::Approx(2.0 / 6.0));
  CHECK_THROWS(frame_error_rate({{0}}, {{0, 1}}, inv));
}

TEST_CASE("evaluation report lists confusions") {
  const PhonemeInventory inv({"a", "b"});
  const EvalReport rep = evaluate({{1, 1}}, {{0, 1}}, {}, {}, inv);
  CHECK_FALSE(rep.has_fer);
  CHECK(rep.confusions.at({0, 1}) == 1);
  const std::string text = rep.to_text(inv);
  CHECK(text.find("# confusions") != std::string::npos);
  CHECK(text.find("a\tb\t1") != std::string::npos);
}
