// tests/test_harmonize.cc

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

#include <filesystem>

#include "doctest.h"
#include "uasr/common.h"
#include "uasr/config.h"
#include "uasr/io.h"

using namespace uasr;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
  return parse_config_text(
      "seed = 5\n"
      "synth.num_phonemes = 3\nsynth.dim = 2\nsynth.utterances = 24\n"
      "synth.mean_length = 4\n"
      "gan.hidden = 8\ngan.context = 3\ngan.d_channels1 = 3\ngan.d_channels2 = 4\n"
      "gan.batch_size = 6\ngan.epochs = 2\n"
      "hmm.iterations = 2\nlm.order = 2\n"
      "harmonize.max_iterations = 2\nharmonize.threshold = 0.001\n");
}

fs::path fresh_dir(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("change rates and the convergence rule") {
  std::vector<std::vector<int>> a(1, std::vector<int>(100, 0)), b = a;
  for (int i = 0; i < 3; ++i) b[0][i] = 1;
  CHECK(label_change_rate(a, b) == doctest::Approx(0.03));
  HarmonizeState s1, s2;
  s1.frame_labels = a;
  s2.frame_labels = b;
  CHECK_FALSE(convergence_check(s1, s2, 0.02));
  CHECK(convergence_check(s1, s1, 0.02));
  s2.frame_labels = {std::vector<int>(100, 1)};
  CHECK_FALSE(convergence_check(s1, s2, 0.99));
  CHECK_THROWS(label_change_rate(a, {}));

  const std::vector<Segmentation> p{Segmentation(5, {2})}, q{Segmentation(5, {3})};
  CHECK(boundary_change_rate(p, q) == doctest::Approx(2.0 / 4.0));
}

TEST_CASE("harmonization writes every iteration and resumes bit-exactly") {
  const RunConfig cfg = tiny_config();
  const HarmonizeData data = prepare_run_data(make_synthetic_dataset(cfg), cfg);
  const fs::path full = fresh_dir("uasr_test_h_full"), part = fresh_dir("uasr_test_h_part");

  const HarmonizeResult r = harmonize_run(data, cfg.harmonize, full.string());
  REQUIRE(r.history.size() >= 1);
  CHECK(r.history.size() <= 2);
  CHECK(r.history[0].transcription_change == 1.0);
  for (const auto &name : {"generator.ckpt", "hmm.txt", "boundaries.txt", "transcriptions.txt",
                           "gan_transcriptions.txt", "frame_labels.txt", "metrics.tsv"})
    CHECK(fs::exists(full / "iter_1" / name));
  CHECK(read_file((full / "history.tsv").string()) == history_to_tsv(r.history));
  for (const auto &s : r.final_state.boundaries) CHECK(s.num_frames() >= 1);

  HarmonizeConfig one = cfg.harmonize;
  one.max_iterations = 1;
  const HarmonizeResult first = harmonize_run(data, one, part.string());
  CHECK(first.history.size() == 1);
  const HarmonizeResult resumed = harmonize_run(data, cfg.harmonize, part.string(), true);
  CHECK(resumed.history.size() == r.history.size());
  CHECK(read_file((part / "history.tsv").string()) == read_file((full / "history.tsv").string()));
  const std::string last = "iter_" + std::to_string(r.history.size());
  for (const auto &name : {"generator.ckpt", "transcriptions.txt", "boundaries.txt"})
    CHECK(read_file((part / last / name).string()) == read_file((full / last / name).string()));
  fs::remove_all(full);
  fs::remove_all(part);
}

TEST_CASE("harmonization configuration is validated") {
  HarmonizeConfig c;
  c.max_iterations = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.threshold = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
