#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace csrl::nn {

using Mat = Eigen::MatrixXd;

class NnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A trainable matrix. Gradients are accumulated here by Tape::backward.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
  void zero_grad() { grad.setZero(); }
};

enum class Init { kZero, kOne, kXavier };

// Owns parameters in creation order; names are unique. Creation order is
// deterministic, which checkpointing and the optimizer rely on.
class ParamStore {
 public:
  Parameter& create(const std::string& name, int rows, int cols, Init init,
                    std::mt19937_64& rng);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  Parameter* find(const std::string& name);
  std::vector<Parameter*> all();
  std::vector<Parameter*> with_prefix(const std::string& prefix);
  std::vector<const Parameter*> with_prefix(const std::string& prefix) const;
  std::size_t count_elements(const std::string& prefix) const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*> by_name_;
};

// Handle to a node on the tape.
struct Expr {
  int i = -1;
  bool valid() const { return i >= 0; }
};

// Reverse-mode autodiff over Eigen matrices. Rows index positions in a
// sequence, columns index features. Build a scalar expression, then call
// backward() once; parameter gradients accumulate into Parameter::grad.
class Tape {
 public:
  // training enables dropout; rng must outlive the tape when training.
  explicit Tape(bool training = false, std::mt19937_64* rng = nullptr)
      : training_(training), rng_(rng) {}

  bool training() const { return training_; }

  const Mat& val(Expr e) const { return node(e).value; }
  const Mat& grad(Expr e) const { return node(e).grad; }
  double scalar(Expr e) const;

  // Leaves.
  Expr value(Mat v);
  Expr param(Parameter& p);

  // Elementwise and linear algebra.
  Expr add(Expr a, Expr b);
  Expr sub(Expr a, Expr b);
  Expr mul(Expr a, Expr b);
  Expr scale(Expr a, double c);
  Expr matmul(Expr a, Expr b);
  // a * b^T without materializing the transpose on the tape.
  Expr matmul_nt(Expr a, Expr b);
  // Adds a 1 x n row vector to every row of a.
  Expr add_row(Expr a, Expr row);
  Expr linear(Expr x, Parameter& w, Parameter& b);

  // Shape surgery.
  Expr concat_cols(const std::vector<Expr>& xs);
  Expr concat_rows(const std::vector<Expr>& xs);
  Expr slice_cols(Expr a, int start, int n);
  Expr slice_rows(Expr a, int start, int n);
  // out.row(k) = a.row(indices[k]); repeated indices accumulate gradient.
  Expr gather_rows(Expr a, std::vector<int> indices);

  // Nonlinearities.
  Expr sigmoid(Expr a);
  Expr tanh(Expr a);
  Expr relu(Expr a);
  Expr swish(Expr a);  // x * sigmoid(x)
  Expr softmax_rows(Expr a);

  // Row-wise layer normalization with learned gain and bias (1 x n each).
  Expr layer_norm(Expr a, Parameter& gain, Parameter& bias);

  // Inverted dropout; identity unless the tape is in training mode.
  Expr dropout(Expr a, double rate);

  // Reductions. Segments are half-open [begin, end) row ranges; each must
  // be non-empty.
  Expr sum_all(Expr a);
  Expr mean_all(Expr a);
  Expr segment_max_rows(Expr a, const std::vector<std::pair<int, int>>& segs);
  Expr segment_mean_rows(Expr a, const std::vector<std::pair<int, int>>& segs);

  // Mean cross-entropy of softmax(logits) at the given rows against integer
  // targets. class_limit restricts the distribution to the first k columns
  // (k = columns when negative). Errors when rows is empty.
  Expr mean_cross_entropy(Expr logits, const std::vector<int>& rows,
                          const std::vector<int>& targets,
                          int class_limit = -1);

  // Propagates gradients from a scalar root through the whole tape.
  void backward(Expr root);

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> back;  // empty for leaves
  };

  Node& node(Expr e) {
    if (!e.valid() || e.i >= static_cast<int>(nodes_.size()))
      throw NnError("invalid tape handle");
    return nodes_[e.i];
  }
  const Node& node(Expr e) const {
    if (!e.valid() || e.i >= static_cast<int>(nodes_.size()))
      throw NnError("invalid tape handle");
    return nodes_[e.i];
  }
  Expr push(Mat value, std::function<void()> back = nullptr);

  std::vector<Node> nodes_;
  bool training_;
  std::mt19937_64* rng_;
};

// Scalar swish activation: x * sigmoid(x).
inline double swish(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace csrl::nn
