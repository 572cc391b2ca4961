// src/config.cc

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

#include "uasr/config.h"

#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "uasr/io.h"

namespace uasr {

namespace fs = std::filesystem;

namespace {

struct Field {
  const char *key;
  const char *doc;
  std::function<void(RunConfig &, const std::string &)> set;
  std::function<std::string(const RunConfig &)> get;
};

// Throws a bare message; the caller adds key and line.
struct ValueError {
  std::string what;
};

template <typename T>
T parse_number(const std::string &s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValueError{"expected a number, got '" + s + "'"};
  return v;
}

bool parse_bool(const std::string &s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ValueError{"expected true or false, got '" + s + "'"};
}

template <typename T>
std::vector<T> parse_list(const std::string &s) {
  std::vector<T> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    std::string item = s.substr(start, pos == std::string::npos ? pos : pos - start);
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ValueError{"empty list item in '" + s + "'"};
    out.push_back(parse_number<T>(item.substr(b, e - b + 1)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T> &v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string fmt(T v) { return std::to_string(v); }

#define UASR_FIELD(KEY, MEMBER, TYPE, DOC)                                     \
  Field {                                                                      \
    KEY, DOC,                                                                  \
        [](RunConfig &c, const std::string &s) { c.MEMBER = parse_as<TYPE>(s); }, \
        [](const RunConfig &c) { return fmt(static_cast<TYPE>(c.MEMBER)); }    \
  }

template <typename T>
T parse_as(const std::string &s) {
  if constexpr (std::is_same_v<T, bool>)
    return parse_bool(s);
  else
    return parse_number<T>(s);
}

const std::vector<Field> &schema() {
  static const std::vector<Field> fields = {
      UASR_FIELD("seed", seed, uint64_t, "global seed; every stage derives its own"),
      Field{"data.dir", "data directory for commands that read one",
            [](RunConfig &c, const std::string &s) { c.data_dir = s; },
            [](const RunConfig &c) { return c.data_dir; }},
      Field{"data.eval_map", "optional scoring map file",
            [](RunConfig &c, const std::string &s) { c.eval_map = s; },
            [](const RunConfig &c) { return c.eval_map; }},
      UASR_FIELD("synth.num_phonemes", synth.num_phonemes, int, "phoneme inventory size"),
      UASR_FIELD("synth.dim", synth.dim, int, "feature dimension"),
      UASR_FIELD("synth.separation", synth.separation, double,
                 "minimum distance between cluster means"),
      UASR_FIELD("synth.stddev", synth.stddev, double, "per-dimension frame noise"),
      UASR_FIELD("synth.duration_min", synth.duration_min, int, "shortest phoneme, frames"),
      UASR_FIELD("synth.duration_max", synth.duration_max, int, "longest phoneme, frames"),
      UASR_FIELD("synth.utterances", synth.utterance_count, int, "number of utterances"),
      UASR_FIELD("synth.mean_length", synth.mean_utterance_length, int,
                 "mean phonemes per utterance"),
      UASR_FIELD("synth.bigram_skew", synth.bigram_skew, double,
                 "log-normal spread of bigram weights"),
      Field{"split.mode", "matched or nonmatched",
            [](RunConfig &c, const std::string &s) {
              try {
                c.split_mode = parse_split_mode(s);
              } catch (const ConfigError &) {
                throw ValueError{"expected matched or nonmatched, got '" + s + "'"};
              }
            },
            [](const RunConfig &c) { return to_string(c.split_mode); }},
      UASR_FIELD("split.acoustic_fraction", acoustic_fraction, double,
                 "nonmatched: share of utterances on the acoustic side"),
      UASR_FIELD("augment.delete_rate", delete_rate, double, "token deletion rate"),
      UASR_FIELD("augment.duplicate_rate", duplicate_rate, double,
                 "token duplication rate"),
      UASR_FIELD("segment.min_len", segment_min_len, std::size_t,
                 "minimum initial segment length"),
      UASR_FIELD("segment.quantile", segment_quantile, double,
                 "peak threshold quantile of frame difference norms"),
      UASR_FIELD("segment.window", segment_window, std::size_t,
                 "frames averaged on each side of a candidate cut"),
      UASR_FIELD("segment.oracle", oracle_boundaries, bool,
                 "start from the reference boundaries"),
      UASR_FIELD("gan.lambda", harmonize.gan.lambda, double, "intra-segment loss weight"),
      UASR_FIELD("gan.alpha", harmonize.gan.alpha, double, "gradient penalty weight"),
      UASR_FIELD("gan.batch_size", harmonize.gan.batch_size, std::size_t, "batch size K"),
      UASR_FIELD("gan.d_steps", harmonize.gan.d_steps_per_g_step, int,
                 "discriminator updates per generator update"),
      UASR_FIELD("gan.lr_g", harmonize.gan.lr_g, double, "generator learning rate"),
      UASR_FIELD("gan.lr_d", harmonize.gan.lr_d, double, "discriminator learning rate"),
      UASR_FIELD("gan.adam_beta1", harmonize.gan.adam_beta1, double, "Adam beta1"),
      UASR_FIELD("gan.adam_beta2", harmonize.gan.adam_beta2, double, "Adam beta2"),
      UASR_FIELD("gan.pairs", harmonize.gan.pairs_per_segment, int,
                 "intra-segment pairs per segment"),
      UASR_FIELD("gan.max_seq_len", harmonize.gan.max_seq_len, std::size_t,
                 "critic input length; 0 = 95th percentile of text lengths"),
      UASR_FIELD("gan.match_lengths", harmonize.gan.match_lengths, bool,
                 "critic batches pair each generated sequence with real text of its length"),
      UASR_FIELD("gan.epochs", harmonize.gan.epochs, int, "passes over the acoustic side"),
      Field{"gan.hidden", "generator hidden layer sizes, comma separated",
            [](RunConfig &c, const std::string &s) {
              c.harmonize.gan.hidden = parse_list<std::size_t>(s);
            },
            [](const RunConfig &c) { return join(c.harmonize.gan.hidden); }},
      UASR_FIELD("gan.context", harmonize.gan.context_window, int,
                 "frames per generator input"),
      Field{"gan.d_widths1", "critic layer-1 kernel widths",
            [](RunConfig &c, const std::string &s) {
              c.harmonize.gan.d_widths1 = parse_list<int>(s);
            },
            [](const RunConfig &c) { return join(c.harmonize.gan.d_widths1); }},
      UASR_FIELD("gan.d_channels1", harmonize.gan.d_channels1, std::size_t,
                 "critic layer-1 channels per width"),
      Field{"gan.d_widths2", "critic layer-2 kernel widths",
            [](RunConfig &c, const std::string &s) {
              c.harmonize.gan.d_widths2 = parse_list<int>(s);
            },
            [](const RunConfig &c) { return join(c.harmonize.gan.d_widths2); }},
      UASR_FIELD("gan.d_channels2", harmonize.gan.d_channels2, std::size_t,
                 "critic layer-2 channels per width"),
      UASR_FIELD("gan.warm_start", harmonize.warm_start, bool,
                 "start each iteration from the previous generator"),
      UASR_FIELD("hmm.states", harmonize.hmm_states, int, "states per phoneme"),
      UASR_FIELD("hmm.self_loop", harmonize.self_loop, double, "self-loop probability"),
      UASR_FIELD("hmm.iterations", harmonize.hmm_iterations, int,
                 "Viterbi training iterations"),
      UASR_FIELD("hmm.floor_scale", harmonize.floor_scale, double,
                 "variance floor as a fraction of global variance"),
      UASR_FIELD("lm.order", harmonize.lm_order, int, "phoneme n-gram order"),
      UASR_FIELD("lm.discount", harmonize.lm_discount, double, "absolute discount"),
      UASR_FIELD("decode.beam", harmonize.hmm_decode.beam, double, "log-score beam"),
      UASR_FIELD("decode.lm_weight_hmm", harmonize.hmm_decode.lm_weight, double,
                 "LM weight when decoding with HMMs"),
      UASR_FIELD("decode.insertion_penalty_hmm", harmonize.hmm_decode.insertion_penalty,
                 double, "per-phoneme score when decoding with HMMs"),
      UASR_FIELD("decode.lm_weight_posterior", harmonize.posterior_decode.lm_weight,
                 double, "LM weight when decoding generator posteriors"),
      UASR_FIELD("decode.insertion_penalty_posterior",
                 harmonize.posterior_decode.insertion_penalty, double,
                 "per-phoneme score when decoding generator posteriors"),
      UASR_FIELD("harmonize.max_iterations", harmonize.max_iterations, int,
                 "iteration limit"),
      UASR_FIELD("harmonize.threshold", harmonize.threshold, double,
                 "converged below this frame-label change rate"),
  };
  return fields;
}

#undef UASR_FIELD

}  // namespace

RunConfig parse_config_text(const std::string &text, const std::string &origin) {
  RunConfig cfg;
  std::map<std::string, const Field *> by_key;
  for (const auto &f : schema()) by_key[f.key] = &f;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(line.substr(0, hash));
    if (body.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq)), value = trim(body.substr(eq + 1));
    auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second)
      throw ConfigError(where + ": key '" + key + "' given twice");
    try {
      it->second->set(cfg, value);
    } catch (const ValueError &e) {
      throw ConfigError(where + ": key '" + key + "': " + e.what);
    }
  }
  cfg.harmonize.seed = cfg.seed;
  return cfg;
}

RunConfig parse_config(const std::string &path) {
  return parse_config_text(read_file(path), path);
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto &f : schema()) out << f.key << " = " << f.get(*this) << '\n';
  return out.str();
}

std::string config_schema_text() {
  const RunConfig defaults;
  std::ostringstream out;
  for (const auto &f : schema())
    out << f.key << '\t' << f.get(defaults) << '\t' << f.doc << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Data directory

void save_dataset(const std::string &dir, const Dataset &ds) {
  fs::create_directories(dir);
  const fs::path d(dir);
  save_inventory((d / "inventory.txt").string(), ds.inventory);
  save_features((d / "features.txt").string(), ds.utterances);
  std::vector<std::string> ids;
  for (const auto &u : ds.utterances) ids.push_back(u.id);
  if (!ds.transcriptions.empty())
    save_keyed_sequences((d / "transcriptions.txt").string(), ids, ds.transcriptions,
                         ds.inventory);
  if (!ds.segmentations.empty())
    save_segmentations((d / "segments.txt").string(), ids, ds.segmentations);
  if (!ds.text.sequences.empty())
    save_text_corpus((d / "text.txt").string(), ds.text, ds.inventory);
}

Dataset load_dataset(const std::string &dir, const std::string &eval_map) {
  const fs::path d(dir);
  Dataset ds;
  ds.inventory = load_inventory((d / "inventory.txt").string());
  const std::string map_path =
      !eval_map.empty() ? eval_map
      : fs::exists(d / "eval_map.txt") ? (d / "eval_map.txt").string()
                                       : std::string();
  if (!map_path.empty()) ds.inventory.set_eval_map(load_eval_map(map_path));
  ds.utterances = load_features((d / "features.txt").string());
  std::map<std::string, std::size_t> index, frames;
  for (std::size_t i = 0; i < ds.utterances.size(); ++i) {
    if (!index.emplace(ds.utterances[i].id, i).second)
      throw ParseError(dir + ": duplicate utterance id '" + ds.utterances[i].id + "'");
    frames[ds.utterances[i].id] = ds.utterances[i].num_frames();
  }
  auto order = [&](const auto &loaded, auto &dst, const std::string &what) {
    dst.assign(ds.utterances.size(), {});
    std::vector<char> got(ds.utterances.size(), 0);
    for (const auto &[id, v] : loaded) {
      auto it = index.find(id);
      if (it == index.end())
        throw ParseError(what + ": unknown utterance '" + id + "'");
      dst[it->second] = v;
      got[it->second] = 1;
    }
    for (std::size_t i = 0; i < got.size(); ++i)
      if (!got[i])
        throw ParseError(what + ": no entry for '" + ds.utterances[i].id + "'");
  };
  if (fs::exists(d / "transcriptions.txt")) {
    const auto p = (d / "transcriptions.txt").string();
    order(load_keyed_sequences(p, ds.inventory), ds.transcriptions, p);
  }
  if (fs::exists(d / "segments.txt")) {
    const auto p = (d / "segments.txt").string();
    order(load_segmentations(p, frames), ds.segmentations, p);
  }
  if (fs::exists(d / "text.txt"))
    ds.text = load_text_corpus((d / "text.txt").string(), ds.inventory);
  return ds;
}

Dataset make_synthetic_dataset(const RunConfig &cfg) {
  const SyntheticSpec spec =
      make_synthetic_spec(cfg.synth, derive_seed(cfg.seed, SeedStage::kSynthetic, 0));
  SyntheticCorpus corpus =
      generate_synthetic_corpus(spec, derive_seed(cfg.seed, SeedStage::kSynthetic, 1));
  std::vector<std::string> symbols;
  for (int p = 0; p < cfg.synth.num_phonemes; ++p) symbols.push_back("p" + std::to_string(p));
  Dataset ds;
  ds.inventory = PhonemeInventory(symbols);
  ds.utterances = std::move(corpus.utterances);
  ds.transcriptions = std::move(corpus.transcriptions);
  ds.segmentations = std::move(corpus.segmentations);
  return ds;
}

HarmonizeData prepare_run_data(const Dataset &ds, const RunConfig &cfg) {
  HarmonizeData data;
  data.inventory = ds.inventory;
  std::vector<std::size_t> acoustic;
  if (!ds.text.sequences.empty()) {
    for (std::size_t i = 0; i < ds.utterances.size(); ++i) acoustic.push_back(i);
    data.text = ds.text;
  } else {
    if (ds.transcriptions.empty())
      throw ConfigError("data: need text.txt or transcriptions.txt for the text side");
    const CorpusSplit split = split_corpus(ds.utterances, ds.transcriptions,
                                           cfg.split_mode, cfg.acoustic_fraction);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ds.utterances.size(); ++i) index[ds.utterances[i].id] = i;
    for (const auto &id : split.acoustic_ids) acoustic.push_back(index.at(id));
    for (const auto &id : split.text_ids)
      data.text.sequences.push_back(ds.transcriptions[index.at(id)]);
  }
  data.augmented = augment_text(data.text, cfg.delete_rate, cfg.duplicate_rate,
                                derive_seed(cfg.seed, SeedStage::kAugment));
  if (cfg.oracle_boundaries && ds.segmentations.empty())
    throw ConfigError("segment.oracle needs reference segments");
  for (std::size_t i : acoustic) {
    data.acoustic.push_back(apply_cmvn(ds.utterances[i]));
    data.initial_boundaries.push_back(
        cfg.oracle_boundaries
            ? ds.segmentations[i]
            : initial_segmentation(data.acoustic.back(), cfg.segment_min_len,
                                   cfg.segment_quantile, cfg.segment_window));
    if (ds.has_reference()) {
      data.ref_transcriptions.push_back(ds.transcriptions[i]);
      data.ref_frames.push_back(expand_to_frames(ds.transcriptions[i], ds.segmentations[i]));
    }
  }
  return data;
}

}  // namespace uasr
