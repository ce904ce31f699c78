#include "csrl/nn/tape.hpp"

#include <cmath>

#include "csrl/nn/rng.hpp"

namespace csrl::nn {

Parameter& ParamStore::create(const std::string& name, int rows, int cols,
                              Init init, std::mt19937_64& rng) {
  if (by_name_.count(name)) throw NnError("duplicate parameter: " + name);
  if (rows <= 0 || cols <= 0)
    throw NnError("parameter must have positive shape: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value.resize(rows, cols);
  switch (init) {
    case Init::kZero:
      p->value.setZero();
      break;
    case Init::kOne:
      p->value.setOnes();
      break;
    case Init::kXavier: {
      double limit = std::sqrt(6.0 / (rows + cols));
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          p->value(r, c) = rand_uniform(rng, -limit, limit);
      break;
    }
  }
  p->grad = Mat::Zero(rows, cols);
  Parameter* raw = p.get();
  params_.push_back(std::move(p));
  by_name_[name] = raw;
  return *raw;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw NnError("unknown parameter: " + name);
  return *it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw NnError("unknown parameter: " + name);
  return *it->second;
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParamStore::with_prefix(const std::string& prefix) {
  std::vector<Parameter*> out;
  for (auto& p : params_)
    if (p->name.rfind(prefix, 0) == 0) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamStore::with_prefix(
    const std::string& prefix) const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_)
    if (p->name.rfind(prefix, 0) == 0) out.push_back(p.get());
  return out;
}

std::size_t ParamStore::count_elements(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p->name.rfind(prefix, 0) == 0) n += p->size();
  return n;
}

double Tape::scalar(Expr e) const {
  const Mat& v = val(e);
  if (v.rows() != 1 || v.cols() != 1)
    throw NnError("expression is not a scalar");
  return v(0, 0);
}

Expr Tape::push(Mat value, std::function<void()> back) {
  Node n;
  n.grad = Mat::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Expr{static_cast<int>(nodes_.size()) - 1};
}

Expr Tape::value(Mat v) { return push(std::move(v)); }

Expr Tape::param(Parameter& p) {
  Expr e = push(p.value);
  Parameter* pp = &p;
  int i = e.i;
  nodes_[i].back = [this, i, pp] { pp->grad += nodes_[i].grad; };
  return e;
}

Expr Tape::add(Expr a, Expr b) {
  if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
    throw NnError("add: shape mismatch");
  Expr out = push(val(a) + val(b));
  int i = out.i, ia = a.i, ib = b.i;
  nodes_[i].back = [this, i, ia, ib] {
    nodes_[ia].grad += nodes_[i].grad;
    nodes_[ib].grad += nodes_[i].grad;
  };
  return out;
}

Expr Tape::sub(Expr a, Expr b) {
  if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
    throw NnError("sub: shape mismatch");
  Expr out = push(val(a) - val(b));
  int i = out.i, ia = a.i, ib = b.i;
  nodes_[i].back = [this, i, ia, ib] {
    nodes_[ia].grad += nodes_[i].grad;
    nodes_[ib].grad -= nodes_[i].grad;
  };
  return out;
}

Expr Tape::mul(Expr a, Expr b) {
  if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
    throw NnError("mul: shape mismatch");
  Expr out = push(val(a).cwiseProduct(val(b)));
  int i = out.i, ia = a.i, ib = b.i;
  nodes_[i].back = [this, i, ia, ib] {
    nodes_[ia].grad += nodes_[i].grad.cwiseProduct(nodes_[ib].value);
    nodes_[ib].grad += nodes_[i].grad.cwiseProduct(nodes_[ia].value);
  };
  return out;
}

Expr Tape::scale(Expr a, double c) {
  Expr out = push(val(a) * c);
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia, c] { nodes_[ia].grad += nodes_[i].grad * c; };
  return out;
}

Expr Tape::matmul(Expr a, Expr b) {
  if (val(a).cols() != val(b).rows()) throw NnError("matmul: shape mismatch");
  Expr out = push(val(a) * val(b));
  int i = out.i, ia = a.i, ib = b.i;
  nodes_[i].back = [this, i, ia, ib] {
    nodes_[ia].grad += nodes_[i].grad * nodes_[ib].value.transpose();
    nodes_[ib].grad += nodes_[ia].value.transpose() * nodes_[i].grad;
  };
  return out;
}

Expr Tape::matmul_nt(Expr a, Expr b) {
  if (val(a).cols() != val(b).cols())
    throw NnError("matmul_nt: shape mismatch");
  Expr out = push(val(a) * val(b).transpose());
  int i = out.i, ia = a.i, ib = b.i;
  nodes_[i].back = [this, i, ia, ib] {
    nodes_[ia].grad += nodes_[i].grad * nodes_[ib].value;
    nodes_[ib].grad += nodes_[i].grad.transpose() * nodes_[ia].value;
  };
  return out;
}

Expr Tape::add_row(Expr a, Expr row) {
  if (val(row).rows() != 1 || val(row).cols() != val(a).cols())
    throw NnError("add_row: shape mismatch");
  Mat v = val(a);
  v.rowwise() += val(row).row(0);
  Expr out = push(std::move(v));
  int i = out.i, ia = a.i, ir = row.i;
  nodes_[i].back = [this, i, ia, ir] {
    nodes_[ia].grad += nodes_[i].grad;
    nodes_[ir].grad.row(0) += nodes_[i].grad.colwise().sum();
  };
  return out;
}

Expr Tape::linear(Expr x, Parameter& w, Parameter& b) {
  return add_row(matmul(x, param(w)), param(b));
}

Expr Tape::concat_cols(const std::vector<Expr>& xs) {
  if (xs.empty()) throw NnError("concat_cols: no inputs");
  Eigen::Index rows = val(xs[0]).rows(), cols = 0;
  for (Expr x : xs) {
    if (val(x).rows() != rows) throw NnError("concat_cols: row mismatch");
    cols += val(x).cols();
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (Expr x : xs) {
    v.middleCols(at, val(x).cols()) = val(x);
    at += val(x).cols();
  }
  Expr out = push(std::move(v));
  std::vector<int> idx;
  for (Expr x : xs) idx.push_back(x.i);
  int i = out.i;
  nodes_[i].back = [this, i, idx] {
    Eigen::Index at = 0;
    for (int ix : idx) {
      nodes_[ix].grad += nodes_[i].grad.middleCols(at, nodes_[ix].value.cols());
      at += nodes_[ix].value.cols();
    }
  };
  return out;
}

Expr Tape::concat_rows(const std::vector<Expr>& xs) {
  if (xs.empty()) throw NnError("concat_rows: no inputs");
  Eigen::Index cols = val(xs[0]).cols(), rows = 0;
  for (Expr x : xs) {
    if (val(x).cols() != cols) throw NnError("concat_rows: column mismatch");
    rows += val(x).rows();
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (Expr x : xs) {
    v.middleRows(at, val(x).rows()) = val(x);
    at += val(x).rows();
  }
  Expr out = push(std::move(v));
  std::vector<int> idx;
  for (Expr x : xs) idx.push_back(x.i);
  int i = out.i;
  nodes_[i].back = [this, i, idx] {
    Eigen::Index at = 0;
    for (int ix : idx) {
      nodes_[ix].grad += nodes_[i].grad.middleRows(at, nodes_[ix].value.rows());
      at += nodes_[ix].value.rows();
    }
  };
  return out;
}

Expr Tape::slice_cols(Expr a, int start, int n) {
  if (start < 0 || n <= 0 || start + n > val(a).cols())
    throw NnError("slice_cols: range out of bounds");
  Expr out = push(val(a).middleCols(start, n));
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia, start, n] {
    nodes_[ia].grad.middleCols(start, n) += nodes_[i].grad;
  };
  return out;
}

Expr Tape::slice_rows(Expr a, int start, int n) {
  if (start < 0 || n <= 0 || start + n > val(a).rows())
    throw NnError("slice_rows: range out of bounds");
  Expr out = push(val(a).middleRows(start, n));
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia, start, n] {
    nodes_[ia].grad.middleRows(start, n) += nodes_[i].grad;
  };
  return out;
}

Expr Tape::gather_rows(Expr a, std::vector<int> indices) {
  if (indices.empty()) throw NnError("gather_rows: no indices");
  for (int ix : indices)
    if (ix < 0 || ix >= val(a).rows())
      throw NnError("gather_rows: index out of bounds");
  Mat v(static_cast<Eigen::Index>(indices.size()), val(a).cols());
  for (std::size_t k = 0; k < indices.size(); ++k)
    v.row(static_cast<Eigen::Index>(k)) = val(a).row(indices[k]);
  Expr out = push(std::move(v));
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia, indices] {
    for (std::size_t k = 0; k < indices.size(); ++k)
      nodes_[ia].grad.row(indices[k]) +=
          nodes_[i].grad.row(static_cast<Eigen::Index>(k));
  };
  return out;
}

Expr Tape::sigmoid(Expr a) {
  Mat y = (1.0 + (-val(a).array()).exp()).inverse().matrix();
  Expr out = push(std::move(y));
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia] {
    const auto& y = nodes_[i].value.array();
    nodes_[ia].grad.array() += nodes_[i].grad.array() * y * (1.0 - y);
  };
  return out;
}

Expr Tape::tanh(Expr a) {
  Expr out = push(val(a).array().tanh().matrix());
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia] {
    const auto& y = nodes_[i].value.array();
    nodes_[ia].grad.array() += nodes_[i].grad.array() * (1.0 - y * y);
  };
  return out;
}

Expr Tape::relu(Expr a) {
  Expr out = push(val(a).cwiseMax(0.0));
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia] {
    nodes_[ia].grad.array() +=
        nodes_[i].grad.array() *
        (nodes_[ia].value.array() > 0.0).cast<double>();
  };
  return out;
}

Expr Tape::swish(Expr a) {
  Mat sig = (1.0 + (-val(a).array()).exp()).inverse().matrix();
  Expr out = push(val(a).cwiseProduct(sig));
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia] {
    const auto& x = nodes_[ia].value.array();
    Eigen::ArrayXXd s = (1.0 + (-x).exp()).inverse();
    nodes_[ia].grad.array() +=
        nodes_[i].grad.array() * (s + x * s * (1.0 - s));
  };
  return out;
}

Expr Tape::softmax_rows(Expr a) {
  Mat y = val(a);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  Expr out = push(std::move(y));
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia] {
    const Mat& y = nodes_[i].value;
    const Mat& g = nodes_[i].grad;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double dot = g.row(r).cwiseProduct(y.row(r)).sum();
      nodes_[ia].grad.row(r) +=
          y.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
    }
  };
  return out;
}

Expr Tape::layer_norm(Expr a, Parameter& gain, Parameter& bias) {
  const Eigen::Index n = val(a).cols();
  if (gain.value.rows() != 1 || gain.value.cols() != n ||
      bias.value.rows() != 1 || bias.value.cols() != n)
    throw NnError("layer_norm: gain/bias shape mismatch");
  constexpr double kEps = 1e-5;

  Expr g = param(gain), b = param(bias);
  const Mat& x = val(a);
  Mat xh(x.rows(), n);
  Mat inv_sigma(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + kEps);
    inv_sigma(r, 0) = is;
    xh.row(r) = (x.row(r).array() - mu) * is;
  }
  Mat y = xh;
  y.array().rowwise() *= gain.value.row(0).array();
  y.rowwise() += bias.value.row(0);
  Expr out = push(std::move(y));
  int i = out.i, ia = a.i, ig = g.i, ib = b.i;
  auto xh_p = std::make_shared<Mat>(std::move(xh));
  auto is_p = std::make_shared<Mat>(std::move(inv_sigma));
  nodes_[i].back = [this, i, ia, ig, ib, xh_p, is_p] {
    const Mat& gr = nodes_[i].grad;
    const Mat& gain_v = nodes_[ig].value;
    nodes_[ib].grad.row(0) += gr.colwise().sum();
    nodes_[ig].grad.row(0) += gr.cwiseProduct(*xh_p).colwise().sum();
    for (Eigen::Index r = 0; r < gr.rows(); ++r) {
      Eigen::RowVectorXd dxh =
          gr.row(r).cwiseProduct(gain_v.row(0));
      double m1 = dxh.mean();
      double m2 = dxh.cwiseProduct(xh_p->row(r)).mean();
      nodes_[ia].grad.row(r) +=
          (*is_p)(r, 0) *
          (dxh.array() - m1 - xh_p->row(r).array() * m2).matrix();
    }
  };
  return out;
}

Expr Tape::dropout(Expr a, double rate) {
  if (!training_ || rate == 0.0) return a;
  if (rate < 0.0 || rate >= 1.0) throw NnError("dropout: bad rate");
  if (!rng_) throw NnError("dropout: training tape has no rng");
  const Mat& x = val(a);
  Mat mask(x.rows(), x.cols());
  const double keep = 1.0 - rate;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      mask(r, c) = rand_unit(*rng_) < keep ? 1.0 / keep : 0.0;
  Expr out = push(x.cwiseProduct(mask));
  int i = out.i, ia = a.i;
  auto mask_p = std::make_shared<Mat>(std::move(mask));
  nodes_[i].back = [this, i, ia, mask_p] {
    nodes_[ia].grad += nodes_[i].grad.cwiseProduct(*mask_p);
  };
  return out;
}

Expr Tape::sum_all(Expr a) {
  Mat v(1, 1);
  v(0, 0) = val(a).sum();
  Expr out = push(std::move(v));
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia] {
    nodes_[ia].grad.array() += nodes_[i].grad(0, 0);
  };
  return out;
}

Expr Tape::mean_all(Expr a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(val(a).size()));
}

Expr Tape::segment_max_rows(Expr a,
                            const std::vector<std::pair<int, int>>& segs) {
  if (segs.empty()) throw NnError("segment_max_rows: no segments");
  const Mat& x = val(a);
  Mat v(static_cast<Eigen::Index>(segs.size()), x.cols());
  auto argmax = std::make_shared<std::vector<std::vector<int>>>(
      segs.size(), std::vector<int>(x.cols()));
  for (std::size_t s = 0; s < segs.size(); ++s) {
    auto [b, e] = segs[s];
    if (b < 0 || e <= b || e > x.rows())
      throw NnError("segment_max_rows: bad segment");
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      int best = b;
      for (int r = b + 1; r < e; ++r)
        if (x(r, c) > x(best, c)) best = r;
      (*argmax)[s][c] = best;
      v(static_cast<Eigen::Index>(s), c) = x(best, c);
    }
  }
  Expr out = push(std::move(v));
  int i = out.i, ia = a.i;
  nodes_[i].back = [this, i, ia, argmax] {
    const Mat& g = nodes_[i].grad;
    for (Eigen::Index s = 0; s < g.rows(); ++s)
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        nodes_[ia].grad((*argmax)[s][c], c) += g(s, c);
  };
  return out;
}

Expr Tape::segment_mean_rows(Expr a,
                             const std::vector<std::pair<int, int>>& segs) {
  if (segs.empty()) throw NnError("segment_mean_rows: no segments");
  const Mat& x = val(a);
  Mat v(static_cast<Eigen::Index>(segs.size()), x.cols());
  for (std::size_t s = 0; s < segs.size(); ++s) {
    auto [b, e] = segs[s];
    if (b < 0 || e <= b || e > x.rows())
      throw NnError("segment_mean_rows: bad segment");
    v.row(static_cast<Eigen::Index>(s)) =
        x.middleRows(b, e - b).colwise().mean();
  }
  Expr out = push(std::move(v));
  int i = out.i, ia = a.i;
  auto segs_p = std::make_shared<std::vector<std::pair<int, int>>>(segs);
  nodes_[i].back = [this, i, ia, segs_p] {
    const Mat& g = nodes_[i].grad;
    for (std::size_t s = 0; s < segs_p->size(); ++s) {
      auto [b, e] = (*segs_p)[s];
      nodes_[ia].grad.middleRows(b, e - b).rowwise() +=
          g.row(static_cast<Eigen::Index>(s)) / static_cast<double>(e - b);
    }
  };
  return out;
}

Expr Tape::mean_cross_entropy(Expr logits, const std::vector<int>& rows,
                              const std::vector<int>& targets,
                              int class_limit) {
  if (rows.empty()) throw NnError("mean_cross_entropy: no target positions");
  if (rows.size() != targets.size())
    throw NnError("mean_cross_entropy: rows/targets size mismatch");
  const Mat& l = val(logits);
  const int k =
      class_limit < 0 ? static_cast<int>(l.cols()) : class_limit;
  if (k <= 0 || k > l.cols())
    throw NnError("mean_cross_entropy: bad class limit");
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j] < 0 || rows[j] >= l.rows())
      throw NnError("mean_cross_entropy: row out of bounds");
    if (targets[j] < 0 || targets[j] >= k)
      throw NnError("mean_cross_entropy: target out of bounds");
  }

  // Softmax over the first k columns only, fused with the loss.
  auto probs = std::make_shared<Mat>(static_cast<Eigen::Index>(rows.size()),
                                     static_cast<Eigen::Index>(k));
  double total = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    Eigen::RowVectorXd z = l.row(rows[j]).head(k);
    double m = z.maxCoeff();
    Eigen::RowVectorXd ex = (z.array() - m).exp();
    double sum = ex.sum();
    probs->row(static_cast<Eigen::Index>(j)) = ex / sum;
    total += m + std::log(sum) - z(targets[j]);
  }
  Mat v(1, 1);
  v(0, 0) = total / static_cast<double>(rows.size());
  Expr out = push(std::move(v));
  int i = out.i, il = logits.i;
  auto rows_p = std::make_shared<std::vector<int>>(rows);
  auto tgt_p = std::make_shared<std::vector<int>>(targets);
  nodes_[i].back = [this, i, il, probs, rows_p, tgt_p, k] {
    const double go = nodes_[i].grad(0, 0) / rows_p->size();
    for (std::size_t j = 0; j < rows_p->size(); ++j) {
      Eigen::RowVectorXd d = probs->row(static_cast<Eigen::Index>(j)) * go;
      d((*tgt_p)[j]) -= go;
      nodes_[il].grad.row((*rows_p)[j]).head(k) += d;
    }
  };
  return out;
}

void Tape::backward(Expr root) {
  const Mat& v = val(root);
  if (v.rows() != 1 || v.cols() != 1)
    throw NnError("backward: root must be a scalar");
  for (auto& n : nodes_) n.grad.setZero();
  nodes_[root.i].grad(0, 0) = 1.0;
  for (int i = root.i; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back();
}

}  // namespace csrl::nn
