// Shared fixtures for the test binaries.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "csrl/config.hpp"
#include "csrl/corpus.hpp"

namespace testutil {

// Self-cleaning temporary directory.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / ("xcsrl-test-" + std::to_string(std::rand()) +
                               "-" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline std::string write_file(const TempDir& dir, const std::string& name,
                              const std::string& content) {
  std::string path = dir.file(name);
  std::ofstream out(path);
  out << content;
  return path;
}

// A deterministic two-speaker dialogue with `utts` utterances of `len`
// tokens each.
inline csrl::corpus::Dialogue make_dialogue(int utts, int len,
                                            const std::string& id = "d") {
  csrl::corpus::Dialogue d;
  d.id = id;
  d.language = "xx";
  for (int u = 0; u < utts; ++u) {
    csrl::corpus::Utterance ut;
    ut.speaker = (u % 2 == 0) ? "A" : "B";
    ut.turn = u + 1;
    for (int k = 0; k < len; ++k)
      ut.tokens.push_back("w" + std::to_string(u) + "_" + std::to_string(k));
    d.utterances.push_back(std::move(ut));
  }
  return d;
}

// Small model configuration that keeps tests fast.
inline csrl::ModelConfig tiny_config() {
  csrl::ModelConfig cfg;
  cfg.vocab_size = 128;
  cfg.backbone_layers = 4;
  cfg.backbone_width = 8;
  cfg.backbone_heads = 2;
  cfg.backbone_ffn = 16;
  cfg.max_seq_len = 64;
  cfg.model_width = 8;
  cfg.word_layers = 1;
  cfg.pa_layers = 1;
  cfg.heads = 2;
  cfg.ffn_width = 16;
  cfg.turn_width = 4;
  cfg.speaker_width = 4;
  cfg.predicate_width = 4;
  cfg.max_turns = 16;
  cfg.max_speakers = 4;
  cfg.utterance_layers = 1;
  cfg.dropout = 0.0;
  return cfg;
}

// Random set of non-overlapping spans over `length` positions, as flat
// spans with roles drawn from the inventory.
inline std::vector<csrl::corpus::FlatSpan> random_flat_spans(
    std::mt19937_64& rng, int length, const csrl::corpus::LabelInventory& inv) {
  std::vector<csrl::corpus::FlatSpan> spans;
  int pos = 0;
  while (pos < length) {
    pos += static_cast<int>(rng() % 3);  // gap 0..2: adjacency is legal
    if (pos >= length) break;
    int max_len = std::min(4, length - pos);
    int len = 1 + static_cast<int>(rng() % max_len);
    if (rng() % 2 == 0) {  // half the slots stay unlabeled
      csrl::corpus::FlatSpan s;
      s.start = pos;
      s.end = pos + len - 1;
      s.role = static_cast<int>(rng() % inv.role_count());
      spans.push_back(s);
      pos += len;
    } else {
      pos += len + 1;
    }
  }
  return spans;
}

}  // namespace testutil
