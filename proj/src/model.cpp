#include "csrl/model.hpp"

namespace csrl {

using nn::Expr;
using nn::Init;
using nn::Tape;

namespace {

const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

CsrlModel::CsrlModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(validated(cfg)),
      tokenizer_(cfg_.vocab_size),
      rng_(seed),
      backbone_(store_, cfg_, rng_),
      sc_(store_, cfg_, rng_),
      pa_(store_, cfg_, rng_),
      sai_tags_(1 + 2 * static_cast<int>(standard_roles().size())) {
  const int h = cfg_.backbone_width;
  const int d = cfg_.model_width;
  auto weight = [&](const char* name, int r, int c) {
    return &store_.create(std::string("heads.") + name, r, c, Init::kXavier,
                          rng_);
  };
  auto bias = [&](const char* name, int c) {
    return &store_.create(std::string("heads.") + name, 1, c, Init::kZero,
                          rng_);
  };
  tlm_w_ = weight("tlm.w", h, cfg_.vocab_size);
  tlm_b_ = bias("tlm.b", cfg_.vocab_size);
  hpsi_w_ = weight("hpsi.w", h, 2);
  hpsi_b_ = bias("hpsi.b", 2);
  spi_w_ = weight("spi.w", d, cfg_.max_speakers);
  spi_b_ = bias("spi.b", cfg_.max_speakers);
  uor_w_ = weight("uor.w", d, cfg_.max_turns);
  uor_b_ = bias("uor.b", cfg_.max_turns);
  sai_adapter_w_ = weight("sai.adapter.w", 4 * h, d);
  sai_adapter_b_ = bias("sai.adapter.b", d);
  sai_w_ = weight("sai.w", pa_.out_width(), sai_tags_);
  sai_b_ = bias("sai.b", sai_tags_);
}

Expr CsrlModel::fused_words(Tape& t, const TokenizedContext& ctx,
                            const std::vector<int>* speaker_override,
                            double dropout) const {
  Expr e = backbone_.encode(t, ctx, dropout);
  const std::vector<int>& speakers =
      speaker_override ? *speaker_override : ctx.speaker_ids;
  Expr s = sc_.word_level_encode(t, e, speakers, ctx.turn_ids, dropout);
  Expr pooled = sc_.utterance_pool(t, s, ctx.utterance_bounds);
  Expr useq = sc_.utterance_seq_encode(t, pooled, dropout);
  return sc_.fuse(t, s, useq, ctx.utt_of_word);
}

Expr CsrlModel::csrl_logits(Tape& t, const TokenizedContext& ctx,
                            double dropout) const {
  Expr g = fused_words(t, ctx, nullptr, dropout);
  Expr a = pa_.pa_encode(t, g, ctx.predicate_flags, dropout);
  return pa_.role_project(t, a);
}

Expr CsrlModel::tlm_logits(Tape& t, const std::vector<int>& subtokens,
                           const std::vector<int>& positions,
                           double dropout) const {
  Expr h = backbone_.final_hidden(t, subtokens, dropout);
  return t.linear(t.gather_rows(h, positions), *tlm_w_, *tlm_b_);
}

Expr CsrlModel::hpsi_logits(Tape& t, const std::vector<int>& subtokens,
                            double dropout) const {
  Expr h = backbone_.final_hidden(t, subtokens, dropout);
  return t.linear(t.slice_rows(h, 0, 1), *hpsi_w_, *hpsi_b_);
}

Expr CsrlModel::spi_logits(Tape& t, Expr g,
                           const std::vector<std::pair<int, int>>& units)
    const {
  return t.linear(t.segment_max_rows(g, units), *spi_w_, *spi_b_);
}

Expr CsrlModel::uor_logits(Tape& t, const TokenizedContext& ctx,
                           int suffix_begin, double dropout) const {
  Expr e = backbone_.encode(t, ctx, dropout);
  Expr s = sc_.word_level_encode(t, e, ctx.speaker_ids, ctx.turn_ids, dropout);
  Expr pooled = sc_.utterance_pool(t, s, ctx.utterance_bounds);
  Expr useq = sc_.utterance_seq_encode(t, pooled, dropout);
  const int n = ctx.utterance_count();
  if (suffix_begin < 0 || suffix_begin >= n)
    throw nn::NnError("uor suffix out of range");
  Expr suffix = t.slice_rows(useq, suffix_begin, n - suffix_begin);
  return t.linear(suffix, *uor_w_, *uor_b_);
}

Expr CsrlModel::sai_logits(Tape& t, const TokenizedContext& ctx,
                           double dropout) const {
  Expr e = backbone_.encode(t, ctx, dropout);
  Expr g = t.linear(e, *sai_adapter_w_, *sai_adapter_b_);
  Expr a = pa_.pa_encode(t, g, ctx.predicate_flags, dropout);
  return t.linear(a, *sai_w_, *sai_b_);
}

}  // namespace csrl
