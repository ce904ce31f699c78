#include "csrl/mtrans.hpp"

#include <cmath>

namespace csrl {

using nn::Expr;
using nn::Init;
using nn::ParamStore;
using nn::Parameter;
using nn::Tape;

MTransLayer::MTransLayer(ParamStore& store, const std::string& prefix,
                         int in_width, int d, int heads, int ffn_width,
                         MTransVariant variant, bool project_before_norm,
                         std::mt19937_64& rng)
    : in_width_(in_width),
      d_(d),
      heads_(heads),
      ffn_(ffn_width),
      variant_(variant),
      project_before_norm_(project_before_norm) {
  if (d % heads != 0)
    throw ConfigError("attention width must be divisible by head count");
  const bool concat1 = variant == MTransVariant::kMTrans ||
                       variant == MTransVariant::kBothMTrans;
  const bool concat2 = variant == MTransVariant::kLaterMTrans ||
                       variant == MTransVariant::kBothMTrans;

  auto mat = [&](const char* name, int r, int c, Init init) {
    Parameter& p = store.create(prefix + "." + name, r, c, init, rng);
    params_.push_back(&p);
    return &p;
  };
  auto weight = [&](const char* name, int r, int c) {
    return mat(name, r, c, Init::kXavier);
  };
  auto bias = [&](const char* name, int c) {
    return mat(name, 1, c, Init::kZero);
  };

  wq_ = weight("attn.wq", in_width, d);
  bq_ = bias("attn.bq", d);
  wk_ = weight("attn.wk", in_width, d);
  bk_ = bias("attn.bk", d);
  wv_ = weight("attn.wv", in_width, d);
  bv_ = bias("attn.bv", d);
  wo_ = weight("attn.wo", d, d);
  bo_ = bias("attn.bo", d);

  if (concat1 || in_width != d) {
    skip1_w_ = weight("skip1.w", in_width, d);
    skip1_b_ = bias("skip1.b", d);
  }
  int w1 = d;
  if (concat1) {
    if (project_before_norm) {
      pre1_w_ = weight("pre1.w", 2 * d, d);
      pre1_b_ = bias("pre1.b", d);
    } else {
      w1 = 2 * d;
    }
  }
  ln1_g_ = mat("ln1.gain", 1, w1, Init::kOne);
  ln1_b_ = bias("ln1.bias", w1);

  ff1_w_ = weight("ffn.w1", w1, ffn_width);
  ff1_b_ = bias("ffn.b1", ffn_width);
  ff2_w_ = weight("ffn.w2", ffn_width, d);
  ff2_b_ = bias("ffn.b2", d);

  if (concat2 || w1 != d) {
    skip2_w_ = weight("skip2.w", w1, d);
    skip2_b_ = bias("skip2.b", d);
  }
  int w2 = d;
  if (concat2) {
    if (project_before_norm) {
      pre2_w_ = weight("pre2.w", 2 * d, d);
      pre2_b_ = bias("pre2.b", d);
    } else {
      w2 = 2 * d;
    }
  }
  ln2_g_ = mat("ln2.gain", 1, w2, Init::kOne);
  ln2_b_ = bias("ln2.bias", w2);

  if (concat2 && !project_before_norm) {
    out_w_ = weight("out.w", 2 * d, d);
    out_b_ = bias("out.b", d);
  }
}

Expr MTransLayer::attention(Tape& t, Expr x) const {
  Expr q = t.linear(x, *wq_, *bq_);
  Expr k = t.linear(x, *wk_, *bk_);
  Expr v = t.linear(x, *wv_, *bv_);
  const int dh = d_ / heads_;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Expr> ctx;
  ctx.reserve(heads_);
  for (int h = 0; h < heads_; ++h) {
    Expr qh = t.slice_cols(q, h * dh, dh);
    Expr kh = t.slice_cols(k, h * dh, dh);
    Expr vh = t.slice_cols(v, h * dh, dh);
    Expr attn = t.softmax_rows(t.scale(t.matmul_nt(qh, kh), inv_scale));
    ctx.push_back(t.matmul(attn, vh));
  }
  return t.linear(t.concat_cols(ctx), *wo_, *bo_);
}

Expr MTransLayer::forward(Tape& t, Expr x, double dropout) const {
  if (t.val(x).cols() != in_width_)
    throw nn::NnError("layer input width mismatch");
  const bool concat1 = variant_ == MTransVariant::kMTrans ||
                       variant_ == MTransVariant::kBothMTrans;
  const bool concat2 = variant_ == MTransVariant::kLaterMTrans ||
                       variant_ == MTransVariant::kBothMTrans;

  Expr a = t.dropout(attention(t, x), dropout);
  Expr sx = skip1_w_ ? t.linear(x, *skip1_w_, *skip1_b_) : x;
  Expr r1 = concat1 ? t.concat_cols({sx, a}) : t.add(sx, a);
  if (pre1_w_) r1 = t.linear(r1, *pre1_w_, *pre1_b_);
  Expr y1 = t.layer_norm(r1, *ln1_g_, *ln1_b_);

  Expr f = t.linear(t.relu(t.linear(y1, *ff1_w_, *ff1_b_)), *ff2_w_, *ff2_b_);
  f = t.dropout(f, dropout);
  Expr sy = skip2_w_ ? t.linear(y1, *skip2_w_, *skip2_b_) : y1;
  Expr r2 = concat2 ? t.concat_cols({sy, f}) : t.add(sy, f);
  if (pre2_w_) r2 = t.linear(r2, *pre2_w_, *pre2_b_);
  Expr y2 = t.layer_norm(r2, *ln2_g_, *ln2_b_);

  return out_w_ ? t.linear(y2, *out_w_, *out_b_) : y2;
}

std::size_t MTransLayer::param_count() const {
  std::size_t n = 0;
  for (const Parameter* p : params_) n += p->size();
  return n;
}

}  // namespace csrl
