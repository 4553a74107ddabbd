// rnnt/tensor.h
//
// Copyright (c)  2026  rnnt-fusion authors

#ifndef RNNT_TENSOR_H_
#define RNNT_TENSOR_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rnnt {

// Dense row-major 64-bit float tensor. Rank is 1 or 2 everywhere in this
// codebase; no broadcasting beyond what the named ops below provide.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s);
  static Tensor Scalar(double x);
  static Tensor FromVector(std::vector<double> values);

  int64_t NumElements() const;
  bool SameShape(const Tensor &other) const { return shape == other.shape; }
  bool IsScalar() const { return NumElements() == 1; }

  int64_t Rows() const { return shape.empty() ? 1 : shape[0]; }
  int64_t Cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double &At(int64_t i) { return v[i]; }
  double At(int64_t i) const { return v[i]; }
  double &At(int64_t r, int64_t c) { return v[r * Cols() + c]; }
  double At(int64_t r, int64_t c) const { return v[r * Cols() + c]; }

  std::string ShapeStr() const;
};

// Named parameter. Non-trainable parameters never receive gradients and are
// skipped by the optimizer.
struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

class Tape;

// One executed op (or leaf) on the tape: its output value, the gradient
// accumulated so far, and a closure that propagates the gradient into the
// parents. Leaves referencing a Parameter keep a pointer instead of a copy.
struct TapeNode {
  Tensor value;                  // owned output (empty for parameter refs)
  const Tensor *value_ref = nullptr;
  Tensor grad;                   // allocated lazily, same shape as val()
  bool requires_grad = false;
  std::function<void(TapeNode *)> backward;  // null for leaves
  Tape *tape = nullptr;
  int64_t id = -1;
  Parameter *param = nullptr;    // set for parameter leaves

  const Tensor &val() const { return value_ref ? *value_ref : value; }
  bool HasGrad() const { return !grad.v.empty(); }
  // Zero-initializes the gradient buffer on first use.
  Tensor &GradBuf();
};

// Reverse-mode tape. Ops are recorded in execution order; Backward visits
// them exactly once in reverse. A tape and its nodes are confined to one
// thread; distinct tapes are independent.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  // --- leaves ---
  TapeNode *Constant(Tensor t);
  TapeNode *Leaf(Tensor t, bool requires_grad);
  // Referencing leaf; dedupes by parameter pointer so gradients from all
  // uses accumulate in one place. requires_grad tracks p->trainable.
  TapeNode *Param(Parameter *p);

  // --- elementwise / shape ops ---
  TapeNode *Add(TapeNode *a, TapeNode *b);
  // a + c * b, same shapes.
  TapeNode *AddScaled(TapeNode *a, TapeNode *b, double c);
  TapeNode *Scale(TapeNode *a, double c);
  TapeNode *Mul(TapeNode *a, TapeNode *b);
  TapeNode *Sigmoid(TapeNode *a);
  TapeNode *Tanh(TapeNode *a);
  TapeNode *Slice1d(TapeNode *a, int64_t offset, int64_t len);
  TapeNode *Concat1d(TapeNode *a, TapeNode *b);
  TapeNode *Pick(TapeNode *a, int64_t index);  // scalar a[index]
  TapeNode *Sum(TapeNode *a);                  // scalar

  // --- linear algebra ---
  TapeNode *Matmul(TapeNode *a, TapeNode *b);
  TapeNode *MatVec(TapeNode *m, TapeNode *x);
  // y = w x + b with w [out x in], x [in], b [out] (b may be null).
  TapeNode *AffineVec(TapeNode *x, TapeNode *w, TapeNode *b);
  // Y = X W^T + 1 b^T with X [m x in], w [out x in], b [out] (b may be null).
  TapeNode *AffineRows(TapeNode *x, TapeNode *w, TapeNode *b);

  // --- structured ops for the transducer lattice ---
  // out[t * U + u] = e[t] + p[u]; e [T x H], p [U x H] -> [(T U) x H].
  TapeNode *PairwiseSum(TapeNode *e, TapeNode *p);
  // Repeats p [U x H] T times -> [(T U) x H], row (t,u) = p[u].
  TapeNode *TileRows(TapeNode *p, int64_t t_count);
  TapeNode *ConcatCols(TapeNode *a, TapeNode *b);
  TapeNode *StackRows(const std::vector<TapeNode *> &rows);
  // Appends one zero column: [m x n] -> [m x (n+1)].
  TapeNode *PadColZero(TapeNode *a);

  // --- softmax family ---
  TapeNode *LogSoftmax(TapeNode *a);      // rank-1
  TapeNode *LogSoftmaxRows(TapeNode *a);  // per row
  // Mean over rows of -logprobs[i, ids[i]].
  TapeNode *MeanNllRows(TapeNode *logprobs, const std::vector<int64_t> &ids);

  // Generic custom op; requires_grad is inherited from parents. The
  // backward closure must route the node's grad into the parents itself
  // (checking parent->requires_grad before touching them).
  TapeNode *MakeNode(Tensor value, const std::vector<TapeNode *> &parents,
                     std::function<void(TapeNode *)> backward);

  // Reverse pass from a scalar loss node produced on this tape. May be
  // called repeatedly; gradients accumulate.
  void Backward(TapeNode *loss);

  // (parameter, leaf) bindings for every Param() call on this tape.
  const std::vector<std::pair<Parameter *, TapeNode *>> &param_bindings()
      const {
    return param_bindings_;
  }

  int64_t NumNodes() const { return static_cast<int64_t>(nodes_.size()); }

 private:
  TapeNode *NewNode();

  std::deque<TapeNode> nodes_;
  std::unordered_map<Parameter *, TapeNode *> param_index_;
  std::vector<std::pair<Parameter *, TapeNode *>> param_bindings_;
};

// Stable log(exp(a) + exp(b)).
double LogSumExp(double a, double b);

}  // namespace rnnt

#endif  // RNNT_TENSOR_H_
