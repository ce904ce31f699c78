#include "csrl/sc_encoder.hpp"

#include <array>

namespace csrl {

using corpus::DataError;
using nn::Expr;
using nn::Init;
using nn::Mat;
using nn::Tape;

ScEncoder::ScEncoder(nn::ParamStore& store, const ModelConfig& cfg,
                     std::mt19937_64& rng)
    : in_width_(4 * cfg.backbone_width),
      d_(cfg.model_width),
      n1_(cfg.word_layers),
      turn_w_(cfg.turn_width),
      spk_w_(cfg.speaker_width),
      max_turns_(cfg.max_turns),
      max_speakers_(cfg.max_speakers),
      lstm_layers_(cfg.utterance_layers) {
  turn_table_ =
      &store.create("sc.turns", cfg.max_turns, turn_w_, Init::kXavier, rng);
  // One extra row embeds the masked-speaker id used by pre-training.
  speaker_table_ = &store.create("sc.speakers", cfg.max_speakers + 1, spk_w_,
                                 Init::kXavier, rng);
  int width = in_width_ + turn_w_ + spk_w_;
  for (int j = 0; j < n1_; ++j) {
    layers_.push_back(std::make_unique<MTransLayer>(
        store, "sc.word_layer" + std::to_string(j), width, d_, cfg.heads,
        cfg.ffn_width, cfg.variant, cfg.project_before_norm, rng));
    width += d_;
  }
  int lstm_in = width;
  for (int l = 0; l < lstm_layers_; ++l) {
    std::array<LstmDir, 2> dirs;
    for (int dir = 0; dir < 2; ++dir) {
      std::string prefix = "sc.useq.layer" + std::to_string(l) +
                           (dir == 0 ? ".fwd" : ".bwd");
      dirs[dir].wx =
          &store.create(prefix + ".wx", lstm_in, 4 * d_, Init::kXavier, rng);
      dirs[dir].wh =
          &store.create(prefix + ".wh", d_, 4 * d_, Init::kXavier, rng);
      dirs[dir].b = &store.create(prefix + ".b", 1, 4 * d_, Init::kZero, rng);
    }
    lstm_.push_back(dirs);
    lstm_in = 2 * d_;
  }
  useq_w_ = &store.create("sc.useq.proj.w", 2 * d_, d_, Init::kXavier, rng);
  useq_b_ = &store.create("sc.useq.proj.b", 1, d_, Init::kZero, rng);
  fuse_w_ = &store.create("sc.fuse.w", word_level_width() + d_, d_,
                          Init::kXavier, rng);
  fuse_b_ = &store.create("sc.fuse.b", 1, d_, Init::kZero, rng);
}

Expr ScEncoder::word_level_encode(Tape& t, Expr e,
                                  const std::vector<int>& speaker_ids,
                                  const std::vector<int>& turn_ids,
                                  double dropout) const {
  const auto n = t.val(e).rows();
  if (t.val(e).cols() != in_width_)
    throw nn::NnError("word representation width mismatch");
  if (static_cast<Eigen::Index>(speaker_ids.size()) != n ||
      static_cast<Eigen::Index>(turn_ids.size()) != n)
    throw nn::NnError("indicator length mismatch");
  std::vector<int> turns(turn_ids);
  for (int& x : turns) {
    if (x < 0) throw DataError("negative turn index");
    if (x >= max_turns_) x = max_turns_ - 1;  // clamp very deep contexts
  }
  for (int x : speaker_ids)
    if (x < 0 || x > max_speakers_)
      throw DataError("speaker id out of range; raise max_speakers");

  Expr s = t.concat_cols({e, t.gather_rows(t.param(*turn_table_), turns),
                          t.gather_rows(t.param(*speaker_table_), speaker_ids)});
  for (const auto& layer : layers_)
    s = t.concat_cols({s, layer->forward(t, s, dropout)});
  return s;
}

Expr ScEncoder::utterance_pool(
    Tape& t, Expr s, const std::vector<std::pair<int, int>>& bounds) const {
  return t.segment_max_rows(s, bounds);
}

Expr ScEncoder::lstm_direction(Tape& t, Expr x, int layer, bool reverse) const {
  const LstmDir& p = lstm_[layer][reverse ? 1 : 0];
  const int n = static_cast<int>(t.val(x).rows());
  Expr wx = t.param(*p.wx);
  Expr wh = t.param(*p.wh);
  Expr b = t.param(*p.b);
  Expr h = t.value(Mat::Zero(1, d_));
  Expr c = t.value(Mat::Zero(1, d_));
  std::vector<Expr> states(n);
  for (int step = 0; step < n; ++step) {
    const int row = reverse ? n - 1 - step : step;
    Expr xt = t.slice_rows(x, row, 1);
    Expr z = t.add_row(t.add(t.matmul(xt, wx), t.matmul(h, wh)), b);
    Expr gi = t.sigmoid(t.slice_cols(z, 0, d_));
    Expr gf = t.sigmoid(t.slice_cols(z, d_, d_));
    Expr gg = t.tanh(t.slice_cols(z, 2 * d_, d_));
    Expr go = t.sigmoid(t.slice_cols(z, 3 * d_, d_));
    c = t.add(t.mul(gf, c), t.mul(gi, gg));
    h = t.mul(go, t.tanh(c));
    states[row] = h;
  }
  return t.concat_rows(states);
}

Expr ScEncoder::utterance_seq_encode(Tape& t, Expr pooled,
                                     double dropout) const {
  Expr x = pooled;
  for (int l = 0; l < lstm_layers_; ++l) {
    Expr fwd = lstm_direction(t, x, l, /*reverse=*/false);
    Expr bwd = lstm_direction(t, x, l, /*reverse=*/true);
    x = t.concat_cols({fwd, bwd});
    x = t.dropout(x, dropout);
  }
  return t.add_row(t.matmul(x, t.param(*useq_w_)), t.param(*useq_b_));
}

Expr ScEncoder::fuse(Tape& t, Expr s, Expr useq,
                     const std::vector<int>& utt_of_word) const {
  Expr broadcast = t.gather_rows(useq, utt_of_word);
  Expr joint = t.concat_cols({s, broadcast});
  return t.swish(t.add_row(t.matmul(joint, t.param(*fuse_w_)),
                           t.param(*fuse_b_)));
}

Expr ScEncoder::encode(Tape& t, Expr e, const TokenizedContext& ctx,
                       double dropout) const {
  Expr s = word_level_encode(t, e, ctx.speaker_ids, ctx.turn_ids, dropout);
  Expr pooled = utterance_pool(t, s, ctx.utterance_bounds);
  Expr useq = utterance_seq_encode(t, pooled, dropout);
  return fuse(t, s, useq, ctx.utt_of_word);
}

}  // namespace csrl
