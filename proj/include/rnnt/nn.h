// rnnt/nn.h
//
// Copyright (c)  2026  rnnt-fusion authors

#ifndef RNNT_NN_H_
#define RNNT_NN_H_

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rnnt/rng.h"
#include "rnnt/tensor.h"

namespace rnnt {

// Owns named parameters in creation order (the order they are written to
// checkpoints). Names must be unique.
class ParamStore {
 public:
  Parameter *Create(const std::string &name, std::vector<int64_t> shape,
                    bool trainable = true);
  Parameter *Find(const std::string &name) const;
  const std::vector<std::unique_ptr<Parameter>> &items() const {
    return items_;
  }
  int64_t TotalElements() const;
  void SetTrainable(bool trainable);

 private:
  std::vector<std::unique_ptr<Parameter>> items_;
};

// Fills with N(0, scale^2).
void InitGaussian(Tensor *t, double scale, Rng *rng);
// Standard fan-in scaling: N(0, 1/in_dim).
void InitFanIn(Tensor *t, int64_t in_dim, Rng *rng);
// Identity (or leading-diagonal) block times gain; rest zero.
void InitScaledIdentity(Tensor *t, double gain);

// One LSTM layer: w [4H x (in+H)] packing the i,f,g,o blocks, b [4H].
struct LstmLayer {
  int64_t in_dim = 0;
  int64_t hidden = 0;
  Parameter *w = nullptr;
  Parameter *b = nullptr;
};

LstmLayer MakeLstmLayer(ParamStore *store, const std::string &prefix,
                        int64_t in_dim, int64_t hidden, Rng *rng);

// Gates: i = sigma(z0), f = sigma(z1), g = tanh(z2), o = sigma(z3);
// c' = f*c + i*g; h' = o * tanh(c').
std::pair<TapeNode *, TapeNode *> LstmStep(Tape *tape, const LstmLayer &layer,
                                           TapeNode *x, TapeNode *h,
                                           TapeNode *c);

// Plain linear layer y = W x + b.
struct LinearLayer {
  Parameter *w = nullptr;  // [out x in]
  Parameter *b = nullptr;  // [out], may be null
};

LinearLayer MakeLinear(ParamStore *store, const std::string &prefix,
                       int64_t in_dim, int64_t out_dim, bool with_bias,
                       Rng *rng);

TapeNode *ApplyLinearVec(Tape *tape, const LinearLayer &l, TapeNode *x);
TapeNode *ApplyLinearRows(Tape *tape, const LinearLayer &l, TapeNode *x);

// A stack of LSTM layers, each followed by a projection. States are held
// as plain tensors between steps (value semantics).
struct LstmStack {
  std::vector<LstmLayer> lstm;
  std::vector<LinearLayer> proj;  // per-layer output projection
  int64_t hidden = 0;
  int64_t proj_dim = 0;
};

LstmStack MakeLstmStack(ParamStore *store, const std::string &prefix,
                        int64_t in_dim, int64_t layers, int64_t hidden,
                        int64_t proj_dim, Rng *rng);

// Per-layer (h, c) values at rest.
struct RnnState {
  std::vector<Tensor> h;
  std::vector<Tensor> c;
  int64_t steps = 0;  // advances consumed (instrumentation)
};

RnnState InitState(const LstmStack &stack);

// Runs one step through the whole stack on the given tape. `state_nodes`
// carries per-layer (h, c) tape nodes; it is updated in place. Returns the
// top projection output.
struct StackStepNodes {
  std::vector<TapeNode *> h;
  std::vector<TapeNode *> c;
};

StackStepNodes LiftState(Tape *tape, const RnnState &state);
TapeNode *StackStep(Tape *tape, const LstmStack &stack, TapeNode *x,
                    StackStepNodes *nodes);

// Convenience: one inference step from/to value states on a throwaway tape
// owned by the caller.
Tensor StackStepValues(Tape *tape, const LstmStack &stack, const Tensor &x,
                       RnnState *state);

}  // namespace rnnt

#endif  // RNNT_NN_H_
