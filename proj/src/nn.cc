// rnnt/nn.cc
//
// Copyright (c)  2026  rnnt-fusion authors

#include "rnnt/nn.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rnnt {

Parameter *ParamStore::Create(const std::string &name,
                              std::vector<int64_t> shape, bool trainable) {
  if (Find(name) != nullptr) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(std::move(shape));
  p->trainable = trainable;
  items_.push_back(std::move(p));
  return items_.back().get();
}

Parameter *ParamStore::Find(const std::string &name) const {
  for (const auto &p : items_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

int64_t ParamStore::TotalElements() const {
  int64_t n = 0;
  for (const auto &p : items_) n += p->value.NumElements();
  return n;
}

void ParamStore::SetTrainable(bool trainable) {
  for (const auto &p : items_) p->trainable = trainable;
}

void InitGaussian(Tensor *t, double scale, Rng *rng) {
  for (double &x : t->v) x = scale * rng->Gaussian();
}

void InitFanIn(Tensor *t, int64_t in_dim, Rng *rng) {
  InitGaussian(t, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
}

void InitScaledIdentity(Tensor *t, double gain) {
  if (t->shape.size() != 2) {
    throw std::invalid_argument("identity init needs a matrix");
  }
  std::fill(t->v.begin(), t->v.end(), 0.0);
  int64_t n = std::min(t->shape[0], t->shape[1]);
  for (int64_t i = 0; i < n; ++i) t->At(i, i) = gain;
}

LstmLayer MakeLstmLayer(ParamStore *store, const std::string &prefix,
                        int64_t in_dim, int64_t hidden, Rng *rng) {
  LstmLayer l;
  l.in_dim = in_dim;
  l.hidden = hidden;
  l.w = store->Create(prefix + ".w", {4 * hidden, in_dim + hidden});
  l.b = store->Create(prefix + ".b", {4 * hidden});
  InitFanIn(&l.w->value, in_dim + hidden, rng);
  return l;
}

std::pair<TapeNode *, TapeNode *> LstmStep(Tape *tape, const LstmLayer &layer,
                                           TapeNode *x, TapeNode *h,
                                           TapeNode *c) {
  int64_t hd = layer.hidden;
  if (x->val().NumElements() != layer.in_dim) {
    throw std::invalid_argument("lstm_step: input width " +
                                x->val().ShapeStr() + " does not match layer");
  }
  TapeNode *xh = tape->Concat1d(x, h);
  TapeNode *z = tape->AffineVec(xh, tape->Param(layer.w),
                                tape->Param(layer.b));
  TapeNode *i = tape->Sigmoid(tape->Slice1d(z, 0, hd));
  TapeNode *f = tape->Sigmoid(tape->Slice1d(z, hd, hd));
  TapeNode *g = tape->Tanh(tape->Slice1d(z, 2 * hd, hd));
  TapeNode *o = tape->Sigmoid(tape->Slice1d(z, 3 * hd, hd));
  TapeNode *c_new = tape->Add(tape->Mul(f, c), tape->Mul(i, g));
  TapeNode *h_new = tape->Mul(o, tape->Tanh(c_new));
  return {h_new, c_new};
}

LinearLayer MakeLinear(ParamStore *store, const std::string &prefix,
                       int64_t in_dim, int64_t out_dim, bool with_bias,
                       Rng *rng) {
  LinearLayer l;
  l.w = store->Create(prefix + ".w", {out_dim, in_dim});
  InitFanIn(&l.w->value, in_dim, rng);
  if (with_bias) l.b = store->Create(prefix + ".b", {out_dim});
  return l;
}

TapeNode *ApplyLinearVec(Tape *tape, const LinearLayer &l, TapeNode *x) {
  return tape->AffineVec(x, tape->Param(l.w),
                         l.b ? tape->Param(l.b) : nullptr);
}

TapeNode *ApplyLinearRows(Tape *tape, const LinearLayer &l, TapeNode *x) {
  return tape->AffineRows(x, tape->Param(l.w),
                          l.b ? tape->Param(l.b) : nullptr);
}

LstmStack MakeLstmStack(ParamStore *store, const std::string &prefix,
                        int64_t in_dim, int64_t layers, int64_t hidden,
                        int64_t proj_dim, Rng *rng) {
  LstmStack s;
  s.hidden = hidden;
  s.proj_dim = proj_dim;
  int64_t cur = in_dim;
  for (int64_t i = 0; i < layers; ++i) {
    std::string lp = prefix + ".l" + std::to_string(i);
    s.lstm.push_back(MakeLstmLayer(store, lp + ".lstm", cur, hidden, rng));
    s.proj.push_back(MakeLinear(store, lp + ".proj", hidden, proj_dim,
                                /*with_bias=*/false, rng));
    cur = proj_dim;
  }
  return s;
}

RnnState InitState(const LstmStack &stack) {
  RnnState st;
  for (const auto &l : stack.lstm) {
    st.h.emplace_back(std::vector<int64_t>{l.hidden});
    st.c.emplace_back(std::vector<int64_t>{l.hidden});
  }
  return st;
}

StackStepNodes LiftState(Tape *tape, const RnnState &state) {
  StackStepNodes n;
  for (size_t i = 0; i < state.h.size(); ++i) {
    n.h.push_back(tape->Constant(state.h[i]));
    n.c.push_back(tape->Constant(state.c[i]));
  }
  return n;
}

TapeNode *StackStep(Tape *tape, const LstmStack &stack, TapeNode *x,
                    StackStepNodes *nodes) {
  TapeNode *cur = x;
  for (size_t i = 0; i < stack.lstm.size(); ++i) {
    auto [h_new, c_new] = LstmStep(tape, stack.lstm[i], cur, nodes->h[i],
                                   nodes->c[i]);
    nodes->h[i] = h_new;
    nodes->c[i] = c_new;
    cur = ApplyLinearVec(tape, stack.proj[i], h_new);
  }
  return cur;
}

Tensor StackStepValues(Tape *tape, const LstmStack &stack, const Tensor &x,
                       RnnState *state) {
  StackStepNodes nodes = LiftState(tape, *state);
  TapeNode *out = StackStep(tape, stack, tape->Constant(x), &nodes);
  for (size_t i = 0; i < state->h.size(); ++i) {
    state->h[i] = nodes.h[i]->val();
    state->c[i] = nodes.c[i]->val();
  }
  ++state->steps;
  return out->val();
}

}  // namespace rnnt
