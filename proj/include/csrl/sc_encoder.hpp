#pragma once

#include <array>
#include <memory>
#include <random>
#include <vector>

#include "csrl/backbone.hpp"
#include "csrl/config.hpp"
#include "csrl/mtrans.hpp"
#include "csrl/nn/tape.hpp"

namespace csrl {

// Captures speaker-aware conversational structure on top of the backbone's
// word representations. Word-level layers see each word together with its
// turn and speaker embeddings, growing the feature vector by d per layer
// (each layer's output is concatenated onto its input). Utterance vectors
// are max-pooled from words, re-contextualized by a BiLSTM over the turn
// sequence, and fused back into every word.
class ScEncoder {
 public:
  ScEncoder(nn::ParamStore& store, const ModelConfig& cfg,
            std::mt19937_64& rng);

  // Word-level pass: input e is |words| x 4h; output is
  // |words| x (4h + d_t + d_r + N1 * d).
  nn::Expr word_level_encode(nn::Tape& t, nn::Expr e,
                             const std::vector<int>& speaker_ids,
                             const std::vector<int>& turn_ids,
                             double dropout = 0.0) const;

  // Max-pool word rows into one row per utterance.
  nn::Expr utterance_pool(nn::Tape& t, nn::Expr s,
                          const std::vector<std::pair<int, int>>& bounds) const;

  // BiLSTM stack over utterance rows, projected to width d.
  nn::Expr utterance_seq_encode(nn::Tape& t, nn::Expr pooled,
                                double dropout = 0.0) const;

  // g = swish(W [s, u'_broadcast] + b), one row per word, width d.
  nn::Expr fuse(nn::Tape& t, nn::Expr s, nn::Expr useq,
                const std::vector<int>& utt_of_word) const;

  // Full pipeline from backbone word representations to g.
  nn::Expr encode(nn::Tape& t, nn::Expr e, const TokenizedContext& ctx,
                  double dropout = 0.0) const;

  int out_width() const { return d_; }
  int word_level_width() const { return in_width_ + turn_w_ + spk_w_ + n1_ * d_; }
  // Speaker id reserved for masked speakers in pre-training.
  int mask_speaker_id() const { return max_speakers_; }

 private:
  nn::Expr lstm_direction(nn::Tape& t, nn::Expr x, int layer, bool reverse)
      const;

  int in_width_, d_, n1_, turn_w_, spk_w_, max_turns_, max_speakers_;
  int lstm_layers_;
  nn::Parameter *turn_table_, *speaker_table_;
  std::vector<std::unique_ptr<MTransLayer>> layers_;
  // Per LSTM layer and direction: input, recurrent, bias parameters.
  struct LstmDir {
    nn::Parameter *wx, *wh, *b;
  };
  std::vector<std::array<LstmDir, 2>> lstm_;
  nn::Parameter *useq_w_, *useq_b_;  // 2d -> d projection
  nn::Parameter *fuse_w_, *fuse_b_;
};

}  // namespace csrl
