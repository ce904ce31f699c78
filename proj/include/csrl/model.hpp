#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "csrl/backbone.hpp"
#include "csrl/config.hpp"
#include "csrl/corpus.hpp"
#include "csrl/nn/tape.hpp"
#include "csrl/pa_encoder.hpp"
#include "csrl/sc_encoder.hpp"

namespace csrl {

// Parameter block tags. Every parameter name starts with one of these
// prefixes; freezing, checkpoint layout, and optimizer grouping all key on
// them.
inline const std::vector<std::string>& block_tags() {
  static const std::vector<std::string> kTags = {"backbone", "sc", "pa",
                                                 "heads"};
  return kTags;
}

// The full model: backbone, the two hierarchical encoders, and the output
// heads used only during pre-training.
class CsrlModel {
 public:
  CsrlModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const Backbone& backbone() const { return backbone_; }
  const ScEncoder& sc() const { return sc_; }
  const PaEncoder& pa() const { return pa_; }

  std::vector<nn::Parameter*> block(const std::string& tag) {
    return store_.with_prefix(tag + ".");
  }

  // Dialogue path: backbone words -> speaker-aware fusion g. A non-null
  // speaker override replaces the context's speaker ids (used when speakers
  // are masked for pre-training).
  nn::Expr fused_words(nn::Tape& t, const TokenizedContext& ctx,
                       const std::vector<int>* speaker_override = nullptr,
                       double dropout = 0.0) const;

  // Per-word tag scores for conversational SRL.
  nn::Expr csrl_logits(nn::Tape& t, const TokenizedContext& ctx,
                       double dropout = 0.0) const;

  // Masked-token prediction scores at the given subtoken positions.
  nn::Expr tlm_logits(nn::Tape& t, const std::vector<int>& subtokens,
                      const std::vector<int>& positions,
                      double dropout = 0.0) const;

  // Pair-identification scores (1 x 2) from the first subtoken.
  nn::Expr hpsi_logits(nn::Tape& t, const std::vector<int>& subtokens,
                       double dropout = 0.0) const;

  // Speaker scores per masked unit; units are [begin, end) word ranges.
  nn::Expr spi_logits(nn::Tape& t, nn::Expr g,
                      const std::vector<std::pair<int, int>>& units) const;

  // Original-position scores for the utterances from suffix_begin on.
  nn::Expr uor_logits(nn::Tape& t, const TokenizedContext& ctx,
                      int suffix_begin, double dropout = 0.0) const;

  // Single-sentence SRL scores; the dialogue encoder is bypassed and the
  // backbone output enters the predicate-argument path through a learned
  // adapter.
  nn::Expr sai_logits(nn::Tape& t, const TokenizedContext& ctx,
                      double dropout = 0.0) const;
  int sai_tag_count() const { return sai_tags_; }

 private:
  ModelConfig cfg_;
  nn::ParamStore store_;
  Tokenizer tokenizer_;
  // Members below are built in declaration order from this one seeded
  // stream, so identical (config, seed) pairs yield bit-identical models.
  std::mt19937_64 rng_;
  Backbone backbone_;
  ScEncoder sc_;
  PaEncoder pa_;
  int sai_tags_;
  nn::Parameter *tlm_w_, *tlm_b_;
  nn::Parameter *hpsi_w_, *hpsi_b_;
  nn::Parameter *spi_w_, *spi_b_;
  nn::Parameter *uor_w_, *uor_b_;
  nn::Parameter *sai_adapter_w_, *sai_adapter_b_;
  nn::Parameter *sai_w_, *sai_b_;
};

}  // namespace csrl
