// tests/test_config.cc

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
#include <string>

#include "doctest.h"
#include "uasr/common.h"
#include "uasr/config.h"

using namespace uasr;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string &text) {
  try {
    parse_config_text(text, "t.cfg");
  } catch (const ConfigError &e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config defaults and overrides") {
  const RunConfig d = parse_config_text("");
  CHECK(d.harmonize.gan.lambda == 0.5);
  CHECK(d.harmonize.gan.alpha == 10.0);
  CHECK(d.harmonize.gan.batch_size == 150);
  CHECK(d.harmonize.max_iterations == 5);
  CHECK(d.harmonize.threshold == 0.02);
  CHECK(d.delete_rate == 0.04);
  CHECK(d.duplicate_rate == 0.11);

  const RunConfig c = parse_config_text(
      "# comment\nseed = 9\ngan.hidden = 32,16  # trailing\nsplit.mode = matched\n"
      "segment.oracle = true\ndecode.lm_weight_posterior = 5\n");
  CHECK(c.seed == 9);
  CHECK(c.harmonize.seed == 9);
  CHECK(c.harmonize.gan.hidden == std::vector<std::size_t>{32, 16});
  CHECK(c.split_mode == SplitMode::kMatched);
  CHECK(c.oracle_boundaries);
  CHECK(c.harmonize.posterior_decode.lm_weight == 5.0);
}

TEST_CASE("config errors name the line and key") {
  CHECK(error_of("seed = 1\nbogus.key = 3\n").find("t.cfg:2") != std::string::npos);
  CHECK(error_of("bogus.key = 3\n").find("bogus.key") != std::string::npos);
  CHECK(error_of("seed = 1\nseed = 2\n").find("twice") != std::string::npos);
  CHECK(error_of("gan.lambda = abc\n").find("gan.lambda") != std::string::npos);
  CHECK(error_of("split.mode = sideways\n").find("split.mode") != std::string::npos);
  CHECK(error_of("just words\n").find("t.cfg:1") != std::string::npos);
}

TEST_CASE("resolved config parses back to itself") {
  const RunConfig c = parse_config_text("seed = 4\ngan.d_widths1 = 3,5\nharmonize.threshold = 0.1\n");
  CHECK(parse_config_text(c.to_text()).to_text() == c.to_text());
  CHECK(config_schema_text().find("gan.lambda\t0.5") != std::string::npos);
}

TEST_CASE("datasets round-trip through a directory") {
  RunConfig cfg;
  cfg.synth.utterance_count = 12;
  cfg.seed = 3;
  const Dataset ds = make_synthetic_dataset(cfg);
  const fs::path dir = fs::temp_directory_path() / "uasr_test_dataset";
  fs::remove_all(dir);
  save_dataset(dir.string(), ds);
  const Dataset back = load_dataset(dir.string());
  REQUIRE(back.utterances.size() == 12);
  CHECK(back.inventory.symbols() == ds.inventory.symbols());
  CHECK(back.utterances[5].features == ds.utterances[5].features);
  CHECK(back.transcriptions == ds.transcriptions);
  CHECK(back.segmentations == ds.segmentations);
  fs::remove_all(dir);
}

TEST_CASE("run data follows the nonmatched split") {
  RunConfig cfg;
  cfg.synth.utterance_count = 40;
  const Dataset ds = make_synthetic_dataset(cfg);
  const HarmonizeData data = prepare_run_data(ds, cfg);
  CHECK(data.acoustic.size() == 30);
  CHECK(data.text.sequences.size() == 10);
  CHECK(data.augmented.sequences.size() == 10);
  CHECK(data.initial_boundaries.size() == 30);
  CHECK(data.ref_frames.size() == 30);
  // Text comes from the held-out utterances.
  CHECK(data.text.sequences[0] == ds.transcriptions[30]);
  CHECK(data.ref_transcriptions[0] == ds.transcriptions[0]);

  cfg.oracle_boundaries = true;
  cfg.split_mode = SplitMode::kMatched;
  const HarmonizeData oracle = prepare_run_data(ds, cfg);
  CHECK(oracle.acoustic.size() == 40);
  CHECK(oracle.initial_boundaries[3] == ds.segmentations[3]);
}
