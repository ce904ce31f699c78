#pragma once

#include <random>
#include <string>

#include "csrl/config.hpp"
#include "csrl/nn/tape.hpp"

namespace csrl {

// Post-norm transformer encoder layer with a configurable residual scheme.
// The two residual connections (around self-attention and around the
// feed-forward block) either add the sublayer output to its input, or
// concatenate the two, doubling the width until it is projected back down.
//
// Input is n x in_width; output is always n x d. When a residual adds and
// the operand widths differ, the skip path gets a learned projection; when
// a residual concatenates, the skip path always gets one, so the sublayer
// never just copies its input forward.
//
// Layer normalization runs after each residual at that residual's width.
// With project_before_norm, a concatenated residual is first projected from
// 2d back to d and normalization always runs at width d.
class MTransLayer {
 public:
  MTransLayer(nn::ParamStore& store, const std::string& prefix, int in_width,
              int d, int heads, int ffn_width, MTransVariant variant,
              bool project_before_norm, std::mt19937_64& rng);

  nn::Expr forward(nn::Tape& t, nn::Expr x, double dropout = 0.0) const;

  int in_width() const { return in_width_; }
  int out_width() const { return d_; }
  std::size_t param_count() const;

 private:
  nn::Expr attention(nn::Tape& t, nn::Expr x) const;

  int in_width_, d_, heads_, ffn_;
  MTransVariant variant_;
  bool project_before_norm_;

  // Self-attention.
  nn::Parameter *wq_, *bq_, *wk_, *bk_, *wv_, *bv_, *wo_, *bo_;
  // Skip projections; null means identity.
  nn::Parameter *skip1_w_ = nullptr, *skip1_b_ = nullptr;
  nn::Parameter *skip2_w_ = nullptr, *skip2_b_ = nullptr;
  // Optional pre-norm reductions of concatenated residuals (2d -> d).
  nn::Parameter *pre1_w_ = nullptr, *pre1_b_ = nullptr;
  nn::Parameter *pre2_w_ = nullptr, *pre2_b_ = nullptr;
  nn::Parameter *ln1_g_, *ln1_b_, *ln2_g_, *ln2_b_;
  // Feed-forward block.
  nn::Parameter *ff1_w_, *ff1_b_, *ff2_w_, *ff2_b_;
  // Final reduction when the second residual concatenates (2d -> d).
  nn::Parameter *out_w_ = nullptr, *out_b_ = nullptr;

  std::vector<nn::Parameter*> params_;
};

}  // namespace csrl
