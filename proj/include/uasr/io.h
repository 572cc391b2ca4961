// uasr/io.h

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

// Text file formats.
//
//   features     records separated by blank lines; each record is a line
//                "id", a line "T d", then T lines of d decimal floats.
//   text corpus  one phoneme sequence per line, space separated symbols.
//   inventory    one symbol per line; line order defines ids 0..M-1.
//   segments     "id b1 b2 ... b(L-1)": internal boundaries, 1-based, each
//                the boundary after that frame.
//   eval map     "train_symbol score_symbol" per line.
//   keyed seqs   "id s1 s2 ...": transcriptions and frame label files.

#ifndef UASR_IO_H_
#define UASR_IO_H_

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uasr/corpus.h"

namespace uasr {

std::vector<Utterance> read_features(std::istream &in);
std::vector<Utterance> load_features(const std::string &path);
void write_features(std::ostream &out, const std::vector<Utterance> &utts);
void save_features(const std::string &path, const std::vector<Utterance> &utts);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

PhonemeInventory load_inventory(const std::string &path);
void save_inventory(const std::string &path, const PhonemeInventory &inv);
std::map<std::string, std::string> load_eval_map(const std::string &path);

TextCorpus load_text_corpus(const std::string &path,
                            const PhonemeInventory &inv);
void save_text_corpus(const std::string &path, const TextCorpus &corpus,
                      const PhonemeInventory &inv);

/// Segmentations keyed by utterance id; frame counts come from num_frames.
std::vector<std::pair<std::string, Segmentation>> load_segmentations(
    const std::string &path, const std::map<std::string, std::size_t> &num_frames);
void save_segmentations(
    const std::string &path, const std::vector<std::string> &ids,
    const std::vector<Segmentation> &segs);

using KeyedSequences = std::vector<std::pair<std::string, PhonemeSequence>>;

KeyedSequences load_keyed_sequences(const std::string &path,
                                    const PhonemeInventory &inv);
void save_keyed_sequences(const std::string &path,
                          const std::vector<std::string> &ids,
                          const std::vector<PhonemeSequence> &seqs,
                          const PhonemeInventory &inv);

/// Reads a whole file; throws Error when it cannot be opened.
std::string read_file(const std::string &path);
void write_file(const std::string &path, const std::string &contents);

}  // namespace uasr

#endif  // UASR_IO_H_
