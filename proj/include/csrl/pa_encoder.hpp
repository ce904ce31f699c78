#pragma once

#include <memory>
#include <random>
#include <vector>

#include "csrl/config.hpp"
#include "csrl/mtrans.hpp"
#include "csrl/nn/tape.hpp"

namespace csrl {

// Couples word representations to the predicate: each word is extended with
// a predicate-indicator embedding and refined by layers whose outputs are
// concatenated onto their inputs, then projected to per-tag scores.
class PaEncoder {
 public:
  PaEncoder(nn::ParamStore& store, const ModelConfig& cfg,
            std::mt19937_64& rng);

  // Input g is |words| x d; output is |words| x (d + d_p + N2 * d).
  nn::Expr pa_encode(nn::Tape& t, nn::Expr g,
                     const std::vector<int>& predicate_flags,
                     double dropout = 0.0) const;

  // Per-word tag scores: swish(W a + b), |words| x tag_count.
  nn::Expr role_project(nn::Tape& t, nn::Expr a) const;

  int out_width() const { return d_ + pred_w_ + n2_ * d_; }
  int tag_count() const { return tag_count_; }

 private:
  int d_, n2_, pred_w_, tag_count_;
  nn::Parameter* pred_table_;  // rows: flag 0 / flag 1
  std::vector<std::unique_ptr<MTransLayer>> layers_;
  nn::Parameter *role_w_, *role_b_;
};

// Row-wise softmax of tag scores, for prediction.
nn::Mat label_distribution(const nn::Mat& logits);

}  // namespace csrl
