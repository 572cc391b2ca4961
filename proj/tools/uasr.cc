// tools/uasr.cc

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

// Command-line front end: one subcommand per pipeline stage.

#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "uasr/config.h"
#include "uasr/eval.h"
#include "uasr/gan.h"
#include "uasr/harmonize.h"
#include "uasr/hmm.h"
#include "uasr/io.h"
#include "uasr/ngram.h"

namespace fs = std::filesystem;
using namespace uasr;

namespace {

const char *kUsage =
    "usage: uasr <command> [options]\n"
    "commands:\n"
    "  synth-data   generate the synthetic corpus into --out\n"
    "  segment      initial boundaries for the acoustic side\n"
    "  train-gan    train the generator on given boundaries\n"
    "  transcribe   transcribe the acoustic side with a generator\n"
    "  train-hmm    flat start and Viterbi training on transcriptions\n"
    "  align        forced alignment with trained HMMs\n"
    "  decode       HMM + phoneme LM decoding\n"
    "  harmonize    the full iterative loop\n"
    "  score        PER / FER of hypothesis against reference files\n"
    "  config       print every config key with its default\n"
    "run 'uasr <command> --help' for options\n";

struct Common {
  std::string config;
  std::string out;
  std::string data;
  int threads = 1;
};

RunConfig load_config(const Common &c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : parse_config(c.config);
  if (!c.data.empty()) cfg.data_dir = c.data;
  return cfg;
}

void prepare_out(const Common &c, const RunConfig &cfg) {
  fs::create_directories(c.out);
  write_file((fs::path(c.out) / "config.resolved").string(), cfg.to_text());
}

Dataset require_data(const RunConfig &cfg) {
  if (cfg.data_dir.empty())
    throw ConfigError("data.dir is not set (use --data or the config key)");
  return load_dataset(cfg.data_dir, cfg.eval_map);
}

std::vector<std::string> ids_of(const std::vector<Utterance> &utts) {
  std::vector<std::string> ids;
  for (const auto &u : utts) ids.push_back(u.id);
  return ids;
}

std::map<std::string, std::size_t> frame_counts(const std::vector<Utterance> &utts) {
  std::map<std::string, std::size_t> out;
  for (const auto &u : utts) out[u.id] = u.num_frames();
  return out;
}

template <typename T>
std::vector<T> keyed_in_order(const std::vector<std::pair<std::string, T>> &loaded,
                              const std::vector<Utterance> &utts,
                              const std::string &path) {
  std::map<std::string, T> by_id(loaded.begin(), loaded.end());
  std::vector<T> out;
  for (const auto &u : utts) {
    auto it = by_id.find(u.id);
    if (it == by_id.end()) throw ParseError(path + ": missing utterance '" + u.id + "'");
    out.push_back(it->second);
  }
  return out;
}

GanConfig stage_gan_config(const RunConfig &cfg) {
  GanConfig g = cfg.harmonize.gan;
  g.seed = derive_seed(cfg.seed, SeedStage::kGanTrain, 1);
  return g;
}

NGramLm text_lm(const HarmonizeData &data, const RunConfig &cfg) {
  return train_ngram_lm(data.text, data.inventory.size(), cfg.harmonize.lm_order,
                        cfg.harmonize.lm_discount);
}

// Symbols of a keyed file, for scoring without an inventory.
std::set<std::string> keyed_symbols(const std::string &path) {
  std::istringstream in(read_file(path));
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    while (ls >> tok) out.insert(tok);
  }
  return out;
}

int run(int argc, char **argv) {
  CLI::App app{"Unsupervised phoneme recognition with a segmental GAN and HMMs"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App *sub, bool needs_out) {
    sub->add_option("--config", c.config, "config file (key = value)");
    auto *o = sub->add_option("--out", c.out, "output directory");
    if (needs_out) o->required();
    sub->add_option("--threads", c.threads, "worker threads (results do not depend on it)");
  };
  auto add_data = [&](CLI::App *sub) {
    sub->add_option("--data", c.data, "data directory (overrides data.dir)");
  };

  auto *synth = app.add_subcommand("synth-data", "generate the synthetic corpus");
  add_common(synth, true);

  auto *segment = app.add_subcommand("segment", "initial boundaries");
  add_common(segment, true);
  add_data(segment);

  std::string boundaries, generator, mode = "segment-vote", transcriptions, hmm_path;
  auto *train_gan_cmd = app.add_subcommand("train-gan", "train the generator");
  add_common(train_gan_cmd, true);
  add_data(train_gan_cmd);
  train_gan_cmd->add_option("--boundaries", boundaries,
                            "boundaries file (default: initial segmentation)");

  auto *transcribe = app.add_subcommand("transcribe", "transcribe with a generator");
  add_common(transcribe, true);
  add_data(transcribe);
  transcribe->add_option("--generator", generator, "generator checkpoint")->required();
  transcribe->add_option("--mode", mode, "segment-vote or hmm-decode")
      ->check(CLI::IsMember({"segment-vote", "hmm-decode"}));
  transcribe->add_option("--boundaries", boundaries, "boundaries for segment-vote");

  auto *train_hmm_cmd = app.add_subcommand("train-hmm", "train monophone HMMs");
  add_common(train_hmm_cmd, true);
  add_data(train_hmm_cmd);
  train_hmm_cmd->add_option("--transcriptions", transcriptions, "keyed transcriptions")
      ->required();

  auto *align = app.add_subcommand("align", "forced alignment");
  add_common(align, true);
  add_data(align);
  align->add_option("--hmm", hmm_path, "HMM file")->required();
  align->add_option("--transcriptions", transcriptions, "keyed transcriptions")
      ->required();

  auto *decode = app.add_subcommand("decode", "HMM + LM decoding");
  add_common(decode, true);
  add_data(decode);
  decode->add_option("--hmm", hmm_path, "HMM file")->required();

  bool resume = false;
  auto *harmonize = app.add_subcommand("harmonize", "iterative GAN/HMM training");
  add_common(harmonize, true);
  add_data(harmonize);
  harmonize->add_flag("--resume", resume, "continue from finished iterations in --out");

  std::string hyp, ref, hyp_frames, ref_frames, inventory;
  auto *score = app.add_subcommand("score", "PER / FER");
  add_common(score, false);
  add_data(score);
  score->add_option("--hyp", hyp, "hypothesis transcriptions")->required();
  score->add_option("--ref", ref, "reference transcriptions")->required();
  score->add_option("--hyp-frames", hyp_frames, "hypothesis frame labels");
  score->add_option("--ref-frames", ref_frames, "reference frame labels");
  score->add_option("--inventory", inventory, "inventory file");

  auto *config = app.add_subcommand("config", "print the config schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    if (app.get_subcommands().empty() && e.get_exit_code() != 0 &&
        dynamic_cast<const CLI::CallForHelp *>(&e) == nullptr) {
      std::cerr << kUsage;
      return 2;
    }
    return app.exit(e);
  }
  if (c.threads < 1) throw ConfigError("--threads must be >= 1");

  if (config->parsed()) {
    std::cout << config_schema_text();
    return 0;
  }

  const RunConfig cfg = load_config(c);
  if (!c.out.empty()) prepare_out(c, cfg);
  const fs::path out(c.out);

  if (synth->parsed()) {
    save_dataset(c.out, make_synthetic_dataset(cfg));
    return 0;
  }

  if (score->parsed()) {
    PhonemeInventory inv;
    if (!inventory.empty()) {
      inv = load_inventory(inventory);
    } else if (!cfg.data_dir.empty()) {
      inv = load_inventory((fs::path(cfg.data_dir) / "inventory.txt").string());
    } else {
      std::set<std::string> syms = keyed_symbols(hyp), r = keyed_symbols(ref);
      syms.insert(r.begin(), r.end());
      if (syms.size() < 2) syms.insert({"<a>", "<b>"});
      inv = PhonemeInventory(std::vector<std::string>(syms.begin(), syms.end()));
    }
    if (!cfg.eval_map.empty()) inv.set_eval_map(load_eval_map(cfg.eval_map));
    auto load_pairs = [&](const std::string &path) {
      return load_keyed_sequences(path, inv);
    };
    const auto h = load_pairs(hyp), r = load_pairs(ref);
    std::map<std::string, PhonemeSequence> hmap(h.begin(), h.end());
    std::vector<PhonemeSequence> hs, rs;
    std::vector<std::vector<int>> hf, rf;
    for (const auto &[id, seq] : r) {
      auto it = hmap.find(id);
      if (it == hmap.end()) throw ParseError(hyp + ": missing utterance '" + id + "'");
      hs.push_back(it->second);
      rs.push_back(seq);
    }
    if (!hyp_frames.empty() || !ref_frames.empty()) {
      if (hyp_frames.empty() || ref_frames.empty())
        throw ConfigError("--hyp-frames and --ref-frames go together");
      const auto hfl = load_pairs(hyp_frames), rfl = load_pairs(ref_frames);
      std::map<std::string, PhonemeSequence> hm(hfl.begin(), hfl.end());
      for (const auto &[id, seq] : rfl) {
        auto it = hm.find(id);
        if (it == hm.end())
          throw ParseError(hyp_frames + ": missing utterance '" + id + "'");
        hf.push_back(it->second);
        rf.push_back(seq);
      }
    }
    const std::string report = evaluate(hs, rs, hf, rf, inv).to_text(inv);
    std::cout << report;
    if (!c.out.empty()) write_file((out / "score.txt").string(), report);
    return 0;
  }

  const Dataset ds = require_data(cfg);
  const HarmonizeData data = prepare_run_data(ds, cfg);
  const auto ids = ids_of(data.acoustic);
  auto load_bounds = [&](const std::string &path) {
    return keyed_in_order(load_segmentations(path, frame_counts(data.acoustic)),
                          data.acoustic, path);
  };
  auto load_trans = [&](const std::string &path) {
    return keyed_in_order(load_keyed_sequences(path, data.inventory), data.acoustic,
                          path);
  };

  if (segment->parsed()) {
    save_segmentations((out / "segments.txt").string(), ids, data.initial_boundaries);
  } else if (train_gan_cmd->parsed()) {
    const auto segs = boundaries.empty() ? data.initial_boundaries : load_bounds(boundaries);
    GanTrace trace;
    GanModel model = train_gan(data.acoustic, segs, data.text, data.augmented,
                               data.inventory.size(), stage_gan_config(cfg), &trace);
    save_checkpoint((out / "generator.ckpt").string(), model.generator.to_checkpoint());
    save_checkpoint((out / "discriminator.ckpt").string(),
                    model.discriminator.to_checkpoint());
    write_file((out / "gan_trace.txt").string(), trace.to_text());
  } else if (transcribe->parsed()) {
    const Generator g = Generator::from_checkpoint(load_checkpoint(generator));
    const bool vote = mode == "segment-vote";
    const auto segs = !vote ? std::vector<Segmentation>{}
                      : boundaries.empty() ? data.initial_boundaries
                                           : load_bounds(boundaries);
    const NGramLm lm = text_lm(data, cfg);
    auto trans = transcribe_corpus(
        g, data.acoustic, segs,
        vote ? TranscribeMode::kSegmentVote : TranscribeMode::kHmmDecode, &lm,
        cfg.harmonize.posterior_decode, cfg.harmonize.self_loop);
    if (vote)
      for (auto &t : trans) t = collapse_repeats(t);
    save_keyed_sequences((out / "transcriptions.txt").string(), ids, trans,
                         data.inventory);
  } else if (train_hmm_cmd->parsed()) {
    const auto trans = load_trans(transcriptions);
    HmmOptions opts{data.inventory.size(), cfg.harmonize.hmm_states,
                    cfg.harmonize.self_loop, cfg.harmonize.floor_scale};
    HmmTrainTrace trace;
    const HmmSet h = train_hmm(data.acoustic, trans, opts,
                               cfg.harmonize.hmm_iterations, &trace);
    write_file((out / "hmm.txt").string(), h.to_text());
    std::ostringstream ll;
    for (std::size_t i = 0; i < trace.total_log_likelihood.size(); ++i)
      ll << i << '\t' << format_double(trace.total_log_likelihood[i]) << '\n';
    write_file((out / "hmm_trace.txt").string(), ll.str());
  } else if (align->parsed()) {
    const HmmSet h = HmmSet::from_text(read_file(hmm_path));
    const auto trans = load_trans(transcriptions);
    std::vector<Segmentation> segs;
    std::vector<PhonemeSequence> frames;
    for (std::size_t i = 0; i < data.acoustic.size(); ++i) {
      const Alignment a = viterbi_align(h, data.acoustic[i], trans[i]);
      segs.push_back(a.segmentation);
      frames.push_back(a.phonemes);
    }
    save_segmentations((out / "boundaries.txt").string(), ids, segs);
    save_keyed_sequences((out / "frame_labels.txt").string(), ids, frames,
                         data.inventory);
  } else if (decode->parsed()) {
    const HmmSet h = HmmSet::from_text(read_file(hmm_path));
    const NGramLm lm = text_lm(data, cfg);
    write_file((out / "lm.txt").string(), lm.to_text(data.inventory));
    std::vector<PhonemeSequence> trans;
    for (const auto &u : data.acoustic)
      trans.push_back(decode_viterbi_lm(h, lm, u, cfg.harmonize.hmm_decode));
    save_keyed_sequences((out / "transcriptions.txt").string(), ids, trans,
                         data.inventory);
  } else if (harmonize->parsed()) {
    if (data.has_reference()) {
      std::vector<PhonemeSequence> frames(data.ref_frames.begin(), data.ref_frames.end());
      save_keyed_sequences((out / "ref_transcriptions.txt").string(), ids,
                           data.ref_transcriptions, data.inventory);
      save_keyed_sequences((out / "ref_frame_labels.txt").string(), ids, frames,
                           data.inventory);
    }
    const auto result = harmonize_run(data, cfg.harmonize, c.out, resume,
                                      [](const std::string &s) { std::cerr << s << '\n'; });
    std::cout << history_to_tsv(result.history);
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return 2;
  }
  try {
    return run(argc, argv);
  } catch (const uasr::Error &e) {
    std::cerr << "uasr: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "uasr: " << e.what() << '\n';
    return 1;
  }
}
