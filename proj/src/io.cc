// src/io.cc

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

#include "uasr/io.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uasr/common.h"

namespace uasr {

namespace {

std::vector<std::string> split_ws(const std::string &line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

bool is_blank(const std::string &line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

[[noreturn]] void parse_fail(const std::string &what, std::size_t line_no) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

double parse_double(const std::string &tok, std::size_t line_no) {
  double v = 0.0;
  const char *first = tok.data(), *last = tok.data() + tok.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    parse_fail("bad number '" + tok + "'", line_no);
  if (!std::isfinite(v)) parse_fail("non-finite value '" + tok + "'", line_no);
  return v;
}

std::size_t parse_size(const std::string &tok, std::size_t line_no) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    parse_fail("bad integer '" + tok + "'", line_no);
  return v;
}

std::ifstream open_in(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string &path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

std::vector<Utterance> read_features(std::istream &in) {
  std::vector<Utterance> out;
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&](std::string &l) {
    if (!std::getline(in, l)) return false;
    ++line_no;
    l = strip_cr(l);
    return true;
  };
  while (true) {
    // Skip blank separators.
    bool have = false;
    while (next_line(line)) {
      if (!is_blank(line)) {
        have = true;
        break;
      }
    }
    if (!have) break;
    auto id_tok = split_ws(line);
    if (id_tok.size() != 1) parse_fail("expected utterance id", line_no);
    Utterance u;
    u.id = id_tok[0];
    if (!next_line(line)) parse_fail("missing 'T d' header", line_no + 1);
    auto hdr = split_ws(line);
    if (hdr.size() != 2) parse_fail("malformed header, expected 'T d'", line_no);
    const std::size_t t_len = parse_size(hdr[0], line_no);
    const std::size_t dim = parse_size(hdr[1], line_no);
    if (t_len < 1 || dim < 1) parse_fail("header needs T >= 1 and d >= 1", line_no);
    u.features = Tensor2(t_len, dim);
    for (std::size_t t = 0; t < t_len; ++t) {
      if (!next_line(line) || is_blank(line))
        parse_fail("record '" + u.id + "' ends before T rows", line_no);
      auto toks = split_ws(line);
      if (toks.size() != dim)
        parse_fail("dimension mismatch: expected " + std::to_string(dim) +
                       " values, got " + std::to_string(toks.size()),
                   line_no);
      for (std::size_t k = 0; k < dim; ++k)
        u.features(t, k) = parse_double(toks[k], line_no);
    }
    out.push_back(std::move(u));
  }
  if (out.empty()) throw ParseError("no records");
  return out;
}

std::vector<Utterance> load_features(const std::string &path) {
  auto in = open_in(path);
  try {
    return read_features(in);
  } catch (const ParseError &e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_features(std::ostream &out, const std::vector<Utterance> &utts) {
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const auto &u = utts[i];
    if (i) out << '\n';
    out << u.id << '\n' << u.num_frames() << ' ' << u.dim() << '\n';
    for (std::size_t t = 0; t < u.num_frames(); ++t) {
      for (std::size_t k = 0; k < u.dim(); ++k) {
        if (k) out << ' ';
        out << format_double(u.features(t, k));
      }
      out << '\n';
    }
  }
}

void save_features(const std::string &path, const std::vector<Utterance> &utts) {
  auto out = open_out(path);
  write_features(out, utts);
}

PhonemeInventory load_inventory(const std::string &path) {
  auto in = open_in(path);
  std::vector<std::string> symbols;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 1)
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": expected one symbol");
    symbols.push_back(toks[0]);
  }
  return PhonemeInventory(std::move(symbols));
}

void save_inventory(const std::string &path, const PhonemeInventory &inv) {
  auto out = open_out(path);
  for (const auto &s : inv.symbols()) out << s << '\n';
}

std::map<std::string, std::string> load_eval_map(const std::string &path) {
  auto in = open_in(path);
  std::map<std::string, std::string> map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 2 || !map.emplace(toks[0], toks[1]).second)
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": expected unique 'train_symbol score_symbol'");
  }
  return map;
}

TextCorpus load_text_corpus(const std::string &path,
                            const PhonemeInventory &inv) {
  auto in = open_in(path);
  TextCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    try {
      corpus.sequences.push_back(inv.encode(toks));
    } catch (const ParseError &e) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return corpus;
}

void save_text_corpus(const std::string &path, const TextCorpus &corpus,
                      const PhonemeInventory &inv) {
  auto out = open_out(path);
  for (const auto &seq : corpus.sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i)
      out << (i ? " " : "") << inv.symbol(seq[i]);
    out << '\n';
  }
}

std::vector<std::pair<std::string, Segmentation>> load_segmentations(
    const std::string &path,
    const std::map<std::string, std::size_t> &num_frames) {
  auto in = open_in(path);
  std::vector<std::pair<std::string, Segmentation>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    auto it = num_frames.find(toks[0]);
    if (it == num_frames.end())
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": unknown utterance '" + toks[0] + "'");
    std::vector<std::size_t> cuts;
    for (std::size_t i = 1; i < toks.size(); ++i)
      cuts.push_back(parse_size(toks[i], line_no));
    try {
      out.emplace_back(toks[0], Segmentation(it->second, std::move(cuts)));
    } catch (const ShapeError &e) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return out;
}

void save_segmentations(const std::string &path,
                        const std::vector<std::string> &ids,
                        const std::vector<Segmentation> &segs) {
  if (ids.size() != segs.size())
    throw ShapeError("save_segmentations: id/segmentation count mismatch");
  auto out = open_out(path);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (std::size_t c : segs[i].cuts()) out << ' ' << c;
    out << '\n';
  }
}

KeyedSequences load_keyed_sequences(const std::string &path,
                                    const PhonemeInventory &inv) {
  auto in = open_in(path);
  KeyedSequences out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    std::vector<std::string> syms(toks.begin() + 1, toks.end());
    try {
      out.emplace_back(toks[0], inv.encode(syms));
    } catch (const ParseError &e) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return out;
}

void save_keyed_sequences(const std::string &path,
                          const std::vector<std::string> &ids,
                          const std::vector<PhonemeSequence> &seqs,
                          const PhonemeInventory &inv) {
  if (ids.size() != seqs.size())
    throw ShapeError("save_keyed_sequences: id/sequence count mismatch");
  auto out = open_out(path);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (int p : seqs[i]) out << ' ' << inv.symbol(p);
    out << '\n';
  }
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string &path, const std::string &contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << contents;
}

}  // namespace uasr
