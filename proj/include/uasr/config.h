// uasr/config.h

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

// Flat "key = value" run configuration and the data-directory layout shared
// by the command-line tool and the tests.

#ifndef UASR_CONFIG_H_
#define UASR_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "uasr/corpus.h"
#include "uasr/harmonize.h"

namespace uasr {

struct RunConfig {
  uint64_t seed = 1;
  std::string data_dir;
  std::string eval_map;  // optional path

  SyntheticParams synth;
  SplitMode split_mode = SplitMode::kNonmatched;
  double acoustic_fraction = 0.75;
  double delete_rate = 0.04;
  double duplicate_rate = 0.11;
  std::size_t segment_min_len = 2;
  double segment_quantile = 0.7;
  std::size_t segment_window = 1;
  /// Use the reference boundaries instead of initial_segmentation.
  bool oracle_boundaries = false;

  /// harmonize.seed follows seed.
  HarmonizeConfig harmonize;

  RunConfig() { harmonize.seed = seed; }

  /// The resolved form: every key, one per line, in schema order.
  std::string to_text() const;
};

/// Parses config text on top of the defaults.  Unknown keys, malformed
/// lines and type errors throw ConfigError naming the key and line.
RunConfig parse_config_text(const std::string &text,
                            const std::string &origin = "config");
RunConfig parse_config(const std::string &path);

/// "key<TAB>default<TAB>description" for every key.
std::string config_schema_text();

// ---------------------------------------------------------------------------
// Data directory
//
//   inventory.txt        one symbol per line
//   features.txt         raw features of every utterance
//   transcriptions.txt   "id p1 p2 ..." reference transcriptions (optional)
//   segments.txt         reference boundaries (optional)
//   text.txt             optional unpaired text corpus; when present every
//                        utterance is acoustic and no split is made
//   eval_map.txt         optional scoring map

struct Dataset {
  PhonemeInventory inventory;
  std::vector<Utterance> utterances;             // raw features
  std::vector<PhonemeSequence> transcriptions;   // empty when absent
  std::vector<Segmentation> segmentations;       // empty when absent
  TextCorpus text;                               // empty when absent

  bool has_reference() const {
    return !transcriptions.empty() && !segmentations.empty();
  }
};

void save_dataset(const std::string &dir, const Dataset &ds);
Dataset load_dataset(const std::string &dir, const std::string &eval_map = "");

/// The synthetic corpus described by cfg.synth under cfg.seed.
Dataset make_synthetic_dataset(const RunConfig &cfg);

/// Split, CMVN, text augmentation and initial boundaries: the inputs of a
/// harmonization run.  Without a text.txt corpus the text comes from the
/// reference transcriptions of the text-side utterances.
HarmonizeData prepare_run_data(const Dataset &ds, const RunConfig &cfg);

}  // namespace uasr

#endif  // UASR_CONFIG_H_
