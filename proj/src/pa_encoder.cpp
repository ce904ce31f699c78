#include "csrl/pa_encoder.hpp"

namespace csrl {

using nn::Expr;
using nn::Init;
using nn::Mat;
using nn::Tape;

PaEncoder::PaEncoder(nn::ParamStore& store, const ModelConfig& cfg,
                     std::mt19937_64& rng)
    : d_(cfg.model_width),
      n2_(cfg.pa_layers),
      pred_w_(cfg.predicate_width),
      tag_count_(1 + 2 * static_cast<int>(cfg.roles.size())) {
  pred_table_ = &store.create("pa.predicate", 2, pred_w_, Init::kXavier, rng);
  int width = d_ + pred_w_;
  for (int j = 0; j < n2_; ++j) {
    layers_.push_back(std::make_unique<MTransLayer>(
        store, "pa.layer" + std::to_string(j), width, d_, cfg.heads,
        cfg.ffn_width, cfg.variant, cfg.project_before_norm, rng));
    width += d_;
  }
  role_w_ = &store.create("pa.role.w", width, tag_count_, Init::kXavier, rng);
  role_b_ = &store.create("pa.role.b", 1, tag_count_, Init::kZero, rng);
}

Expr PaEncoder::pa_encode(Tape& t, Expr g,
                          const std::vector<int>& predicate_flags,
                          double dropout) const {
  if (t.val(g).cols() != d_)
    throw nn::NnError("predicate-argument input width mismatch");
  if (static_cast<Eigen::Index>(predicate_flags.size()) != t.val(g).rows())
    throw nn::NnError("predicate flag length mismatch");
  for (int f : predicate_flags)
    if (f != 0 && f != 1) throw nn::NnError("predicate flags must be 0 or 1");

  Expr a = t.concat_cols(
      {g, t.gather_rows(t.param(*pred_table_), predicate_flags)});
  for (const auto& layer : layers_)
    a = t.concat_cols({a, layer->forward(t, a, dropout)});
  return a;
}

Expr PaEncoder::role_project(Tape& t, Expr a) const {
  return t.swish(
      t.add_row(t.matmul(a, t.param(*role_w_)), t.param(*role_b_)));
}

Mat label_distribution(const Mat& logits) {
  Mat p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    double m = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - m).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace csrl
