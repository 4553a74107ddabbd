// rnnt/tensor.cc
//
// Copyright (c)  2026  rnnt-fusion authors

#include "rnnt/tensor.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rnnt {

namespace {

int64_t ProductOf(const std::vector<int64_t> &shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

[[noreturn]] void ShapeError(const std::string &op, const Tensor &a,
                             const Tensor &b) {
  throw std::invalid_argument(op + ": shape mismatch " + a.ShapeStr() +
                              " vs " + b.ShapeStr());
}

void CheckRank1(const std::string &op, const Tensor &t) {
  if (t.shape.size() != 1) {
    throw std::invalid_argument(op + ": expected rank-1 tensor, got " +
                                t.ShapeStr());
  }
}

void CheckRank2(const std::string &op, const Tensor &t) {
  if (t.shape.size() != 2) {
    throw std::invalid_argument(op + ": expected rank-2 tensor, got " +
                                t.ShapeStr());
  }
}

void CheckSameTape(const std::string &op, Tape *tape, TapeNode *n) {
  if (n == nullptr || n->tape != tape) {
    throw std::invalid_argument(op + ": input node is not on this tape");
  }
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
  for (int64_t d : shape) {
    if (d <= 0) {
      throw std::invalid_argument("Tensor: non-positive dimension in " +
                                  ShapeStr());
    }
  }
  v.assign(ProductOf(shape), 0.0);
}

Tensor Tensor::Scalar(double x) {
  Tensor t(std::vector<int64_t>{1});
  t.v[0] = x;
  return t;
}

Tensor Tensor::FromVector(std::vector<double> values) {
  Tensor t;
  t.shape = {static_cast<int64_t>(values.size())};
  t.v = std::move(values);
  return t;
}

int64_t Tensor::NumElements() const { return ProductOf(shape); }

std::string Tensor::ShapeStr() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor &TapeNode::GradBuf() {
  if (grad.v.empty()) {
    grad.shape = val().shape;
    grad.v.assign(val().v.size(), 0.0);
  }
  return grad;
}

double LogSumExp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

TapeNode *Tape::NewNode() {
  nodes_.emplace_back();
  TapeNode *n = &nodes_.back();
  n->tape = this;
  n->id = static_cast<int64_t>(nodes_.size()) - 1;
  return n;
}

TapeNode *Tape::Constant(Tensor t) { return Leaf(std::move(t), false); }

TapeNode *Tape::Leaf(Tensor t, bool requires_grad) {
  TapeNode *n = NewNode();
  n->value = std::move(t);
  n->requires_grad = requires_grad;
  return n;
}

TapeNode *Tape::Param(Parameter *p) {
  auto it = param_index_.find(p);
  if (it != param_index_.end()) return it->second;
  TapeNode *n = NewNode();
  n->value_ref = &p->value;
  n->requires_grad = p->trainable;
  n->param = p;
  param_index_[p] = n;
  param_bindings_.emplace_back(p, n);
  return n;
}

TapeNode *Tape::MakeNode(Tensor value, const std::vector<TapeNode *> &parents,
                         std::function<void(TapeNode *)> backward) {
  bool rg = false;
  for (TapeNode *p : parents) {
    CheckSameTape("MakeNode", this, p);
    rg = rg || p->requires_grad;
  }
  TapeNode *n = NewNode();
  n->value = std::move(value);
  n->requires_grad = rg;
  if (rg) n->backward = std::move(backward);
  return n;
}

TapeNode *Tape::Add(TapeNode *a, TapeNode *b) { return AddScaled(a, b, 1.0); }

TapeNode *Tape::AddScaled(TapeNode *a, TapeNode *b, double c) {
  if (!a->val().SameShape(b->val())) ShapeError("add", a->val(), b->val());
  Tensor out = a->val();
  const auto &bv = b->val().v;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += c * bv[i];
  return MakeNode(std::move(out), {a, b}, [a, b, c](TapeNode *self) {
    const auto &g = self->grad.v;
    if (a->requires_grad) {
      auto &ga = a->GradBuf().v;
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b->requires_grad) {
      auto &gb = b->GradBuf().v;
      for (size_t i = 0; i < g.size(); ++i) gb[i] += c * g[i];
    }
  });
}

TapeNode *Tape::Scale(TapeNode *a, double c) {
  Tensor out = a->val();
  for (double &x : out.v) x *= c;
  return MakeNode(std::move(out), {a}, [a, c](TapeNode *self) {
    if (!a->requires_grad) return;
    auto &ga = a->GradBuf().v;
    const auto &g = self->grad.v;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

TapeNode *Tape::Mul(TapeNode *a, TapeNode *b) {
  if (!a->val().SameShape(b->val())) ShapeError("mul", a->val(), b->val());
  Tensor out = a->val();
  const auto &bv = b->val().v;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= bv[i];
  return MakeNode(std::move(out), {a, b}, [a, b](TapeNode *self) {
    const auto &g = self->grad.v;
    if (a->requires_grad) {
      auto &ga = a->GradBuf().v;
      const auto &bv = b->val().v;
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b->requires_grad) {
      auto &gb = b->GradBuf().v;
      const auto &av = a->val().v;
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

TapeNode *Tape::Sigmoid(TapeNode *a) {
  Tensor out = a->val();
  for (double &x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  return MakeNode(std::move(out), {a}, [a](TapeNode *self) {
    if (!a->requires_grad) return;
    auto &ga = a->GradBuf().v;
    const auto &g = self->grad.v;
    const auto &y = self->val().v;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

TapeNode *Tape::Tanh(TapeNode *a) {
  Tensor out = a->val();
  for (double &x : out.v) x = std::tanh(x);
  return MakeNode(std::move(out), {a}, [a](TapeNode *self) {
    if (!a->requires_grad) return;
    auto &ga = a->GradBuf().v;
    const auto &g = self->grad.v;
    const auto &y = self->val().v;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

TapeNode *Tape::Slice1d(TapeNode *a, int64_t offset, int64_t len) {
  CheckRank1("slice", a->val());
  if (offset < 0 || len <= 0 || offset + len > a->val().shape[0]) {
    throw std::invalid_argument("slice: range out of bounds for " +
                                a->val().ShapeStr());
  }
  Tensor out({len});
  for (int64_t i = 0; i < len; ++i) out.v[i] = a->val().v[offset + i];
  return MakeNode(std::move(out), {a}, [a, offset, len](TapeNode *self) {
    if (!a->requires_grad) return;
    auto &ga = a->GradBuf().v;
    const auto &g = self->grad.v;
    for (int64_t i = 0; i < len; ++i) ga[offset + i] += g[i];
  });
}

TapeNode *Tape::Concat1d(TapeNode *a, TapeNode *b) {
  CheckRank1("concat", a->val());
  CheckRank1("concat", b->val());
  int64_t na = a->val().shape[0];
  int64_t nb = b->val().shape[0];
  Tensor out({na + nb});
  for (int64_t i = 0; i < na; ++i) out.v[i] = a->val().v[i];
  for (int64_t i = 0; i < nb; ++i) out.v[na + i] = b->val().v[i];
  return MakeNode(std::move(out), {a, b}, [a, b, na, nb](TapeNode *self) {
    const auto &g = self->grad.v;
    if (a->requires_grad) {
      auto &ga = a->GradBuf().v;
      for (int64_t i = 0; i < na; ++i) ga[i] += g[i];
    }
    if (b->requires_grad) {
      auto &gb = b->GradBuf().v;
      for (int64_t i = 0; i < nb; ++i) gb[i] += g[na + i];
    }
  });
}

TapeNode *Tape::Pick(TapeNode *a, int64_t index) {
  CheckRank1("pick", a->val());
  if (index < 0 || index >= a->val().shape[0]) {
    throw std::invalid_argument("pick: index out of bounds");
  }
  return MakeNode(Tensor::Scalar(a->val().v[index]), {a},
                  [a, index](TapeNode *self) {
                    if (!a->requires_grad) return;
                    a->GradBuf().v[index] += self->grad.v[0];
                  });
}

TapeNode *Tape::Sum(TapeNode *a) {
  double s = 0.0;
  for (double x : a->val().v) s += x;
  return MakeNode(Tensor::Scalar(s), {a}, [a](TapeNode *self) {
    if (!a->requires_grad) return;
    auto &ga = a->GradBuf().v;
    double g = self->grad.v[0];
    for (double &x : ga) x += g;
  });
}

TapeNode *Tape::Matmul(TapeNode *a, TapeNode *b) {
  CheckRank2("matmul", a->val());
  CheckRank2("matmul", b->val());
  const Tensor &av = a->val();
  const Tensor &bv = b->val();
  if (av.shape[1] != bv.shape[0]) {
    throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                av.ShapeStr() + " vs " + bv.ShapeStr());
  }
  int64_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
  Tensor out({m, n});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      double aip = av.v[i * k + p];
      if (aip == 0.0) continue;
      for (int64_t j = 0; j < n; ++j) {
        out.v[i * n + j] += aip * bv.v[p * n + j];
      }
    }
  }
  return MakeNode(std::move(out), {a, b}, [a, b, m, k, n](TapeNode *self) {
    const auto &g = self->grad.v;
    if (a->requires_grad) {
      // dA = dC . B^T
      auto &ga = a->GradBuf().v;
      const auto &bv = b->val().v;
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (int64_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += s;
        }
      }
    }
    if (b->requires_grad) {
      // dB = A^T . dC
      auto &gb = b->GradBuf().v;
      const auto &av = a->val().v;
      for (int64_t p = 0; p < k; ++p) {
        for (int64_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (int64_t i = 0; i < m; ++i) s += av[i * k + p] * g[i * n + j];
          gb[p * n + j] += s;
        }
      }
    }
  });
}

TapeNode *Tape::MatVec(TapeNode *m, TapeNode *x) {
  return AffineVec(x, m, nullptr);
}

TapeNode *Tape::AffineVec(TapeNode *x, TapeNode *w, TapeNode *b) {
  CheckRank2("affine_vec", w->val());
  CheckRank1("affine_vec", x->val());
  const Tensor &wv = w->val();
  const Tensor &xv = x->val();
  int64_t out_dim = wv.shape[0], in_dim = wv.shape[1];
  if (xv.shape[0] != in_dim) ShapeError("affine_vec", wv, xv);
  if (b != nullptr && b->val().shape != std::vector<int64_t>{out_dim}) {
    ShapeError("affine_vec bias", wv, b->val());
  }
  Tensor out({out_dim});
  for (int64_t i = 0; i < out_dim; ++i) {
    double s = b ? b->val().v[i] : 0.0;
    const double *row = &wv.v[i * in_dim];
    for (int64_t j = 0; j < in_dim; ++j) s += row[j] * xv.v[j];
    out.v[i] = s;
  }
  std::vector<TapeNode *> parents = {x, w};
  if (b) parents.push_back(b);
  return MakeNode(std::move(out), parents,
                  [x, w, b, out_dim, in_dim](TapeNode *self) {
                    const auto &g = self->grad.v;
                    if (x->requires_grad) {
                      auto &gx = x->GradBuf().v;
                      const auto &wv = w->val().v;
                      for (int64_t i = 0; i < out_dim; ++i) {
                        double gi = g[i];
                        if (gi == 0.0) continue;
                        const double *row = &wv[i * in_dim];
                        for (int64_t j = 0; j < in_dim; ++j) {
                          gx[j] += gi * row[j];
                        }
                      }
                    }
                    if (w->requires_grad) {
                      auto &gw = w->GradBuf().v;
                      const auto &xv = x->val().v;
                      for (int64_t i = 0; i < out_dim; ++i) {
                        double gi = g[i];
                        if (gi == 0.0) continue;
                        double *row = &gw[i * in_dim];
                        for (int64_t j = 0; j < in_dim; ++j) {
                          row[j] += gi * xv[j];
                        }
                      }
                    }
                    if (b && b->requires_grad) {
                      auto &gb = b->GradBuf().v;
                      for (int64_t i = 0; i < out_dim; ++i) gb[i] += g[i];
                    }
                  });
}

TapeNode *Tape::AffineRows(TapeNode *x, TapeNode *w, TapeNode *b) {
  CheckRank2("affine_rows", x->val());
  CheckRank2("affine_rows", w->val());
  const Tensor &xv = x->val();
  const Tensor &wv = w->val();
  int64_t m = xv.shape[0], in_dim = xv.shape[1], out_dim = wv.shape[0];
  if (wv.shape[1] != in_dim) ShapeError("affine_rows", xv, wv);
  if (b != nullptr && b->val().shape != std::vector<int64_t>{out_dim}) {
    ShapeError("affine_rows bias", wv, b->val());
  }
  Tensor out({m, out_dim});
  for (int64_t r = 0; r < m; ++r) {
    const double *xr = &xv.v[r * in_dim];
    double *or_ = &out.v[r * out_dim];
    for (int64_t i = 0; i < out_dim; ++i) {
      double s = b ? b->val().v[i] : 0.0;
      const double *row = &wv.v[i * in_dim];
      for (int64_t j = 0; j < in_dim; ++j) s += row[j] * xr[j];
      or_[i] = s;
    }
  }
  std::vector<TapeNode *> parents = {x, w};
  if (b) parents.push_back(b);
  return MakeNode(std::move(out), parents,
                  [x, w, b, m, in_dim, out_dim](TapeNode *self) {
                    const auto &g = self->grad.v;
                    if (x->requires_grad) {
                      auto &gx = x->GradBuf().v;
                      const auto &wv = w->val().v;
                      for (int64_t r = 0; r < m; ++r) {
                        const double *gr = &g[r * out_dim];
                        double *gxr = &gx[r * in_dim];
                        for (int64_t i = 0; i < out_dim; ++i) {
                          double gi = gr[i];
                          if (gi == 0.0) continue;
                          const double *row = &wv[i * in_dim];
                          for (int64_t j = 0; j < in_dim; ++j) {
                            gxr[j] += gi * row[j];
                          }
                        }
                      }
                    }
                    if (w->requires_grad) {
                      auto &gw = w->GradBuf().v;
                      const auto &xv = x->val().v;
                      for (int64_t r = 0; r < m; ++r) {
                        const double *gr = &g[r * out_dim];
                        const double *xr = &xv[r * in_dim];
                        for (int64_t i = 0; i < out_dim; ++i) {
                          double gi = gr[i];
                          if (gi == 0.0) continue;
                          double *row = &gw[i * in_dim];
                          for (int64_t j = 0; j < in_dim; ++j) {
                            row[j] += gi * xr[j];
                          }
                        }
                      }
                    }
                    if (b && b->requires_grad) {
                      auto &gb = b->GradBuf().v;
                      for (int64_t r = 0; r < m; ++r) {
                        for (int64_t i = 0; i < out_dim; ++i) {
                          gb[i] += g[r * out_dim + i];
                        }
                      }
                    }
                  });
}

TapeNode *Tape::PairwiseSum(TapeNode *e, TapeNode *p) {
  CheckRank2("pairwise_sum", e->val());
  CheckRank2("pairwise_sum", p->val());
  const Tensor &ev = e->val();
  const Tensor &pv = p->val();
  if (ev.shape[1] != pv.shape[1]) ShapeError("pairwise_sum", ev, pv);
  int64_t t_count = ev.shape[0], u_count = pv.shape[0], h = ev.shape[1];
  Tensor out({t_count * u_count, h});
  for (int64_t t = 0; t < t_count; ++t) {
    const double *er = &ev.v[t * h];
    for (int64_t u = 0; u < u_count; ++u) {
      const double *pr = &pv.v[u * h];
      double *o = &out.v[(t * u_count + u) * h];
      for (int64_t j = 0; j < h; ++j) o[j] = er[j] + pr[j];
    }
  }
  return MakeNode(std::move(out), {e, p},
                  [e, p, t_count, u_count, h](TapeNode *self) {
                    const auto &g = self->grad.v;
                    if (e->requires_grad) {
                      auto &ge = e->GradBuf().v;
                      for (int64_t t = 0; t < t_count; ++t) {
                        double *gr = &ge[t * h];
                        for (int64_t u = 0; u < u_count; ++u) {
                          const double *go = &g[(t * u_count + u) * h];
                          for (int64_t j = 0; j < h; ++j) gr[j] += go[j];
                        }
                      }
                    }
                    if (p->requires_grad) {
                      auto &gp = p->GradBuf().v;
                      for (int64_t u = 0; u < u_count; ++u) {
                        double *gr = &gp[u * h];
                        for (int64_t t = 0; t < t_count; ++t) {
                          const double *go = &g[(t * u_count + u) * h];
                          for (int64_t j = 0; j < h; ++j) gr[j] += go[j];
                        }
                      }
                    }
                  });
}

TapeNode *Tape::TileRows(TapeNode *p, int64_t t_count) {
  CheckRank2("tile_rows", p->val());
  const Tensor &pv = p->val();
  int64_t u_count = pv.shape[0], h = pv.shape[1];
  Tensor out({t_count * u_count, h});
  for (int64_t t = 0; t < t_count; ++t) {
    std::copy(pv.v.begin(), pv.v.end(), out.v.begin() + t * u_count * h);
  }
  return MakeNode(std::move(out), {p},
                  [p, t_count, u_count, h](TapeNode *self) {
                    if (!p->requires_grad) return;
                    auto &gp = p->GradBuf().v;
                    const auto &g = self->grad.v;
                    for (int64_t t = 0; t < t_count; ++t) {
                      const double *block = &g[t * u_count * h];
                      for (int64_t i = 0; i < u_count * h; ++i) {
                        gp[i] += block[i];
                      }
                    }
                  });
}

TapeNode *Tape::ConcatCols(TapeNode *a, TapeNode *b) {
  CheckRank2("concat_cols", a->val());
  CheckRank2("concat_cols", b->val());
  const Tensor &av = a->val();
  const Tensor &bv = b->val();
  if (av.shape[0] != bv.shape[0]) ShapeError("concat_cols", av, bv);
  int64_t m = av.shape[0], p = av.shape[1], q = bv.shape[1];
  Tensor out({m, p + q});
  for (int64_t r = 0; r < m; ++r) {
    for (int64_t j = 0; j < p; ++j) out.v[r * (p + q) + j] = av.v[r * p + j];
    for (int64_t j = 0; j < q; ++j) {
      out.v[r * (p + q) + p + j] = bv.v[r * q + j];
    }
  }
  return MakeNode(std::move(out), {a, b}, [a, b, m, p, q](TapeNode *self) {
    const auto &g = self->grad.v;
    if (a->requires_grad) {
      auto &ga = a->GradBuf().v;
      for (int64_t r = 0; r < m; ++r) {
        for (int64_t j = 0; j < p; ++j) ga[r * p + j] += g[r * (p + q) + j];
      }
    }
    if (b->requires_grad) {
      auto &gb = b->GradBuf().v;
      for (int64_t r = 0; r < m; ++r) {
        for (int64_t j = 0; j < q; ++j) {
          gb[r * q + j] += g[r * (p + q) + p + j];
        }
      }
    }
  });
}

TapeNode *Tape::StackRows(const std::vector<TapeNode *> &rows) {
  if (rows.empty()) {
    throw std::invalid_argument("stack_rows: no rows");
  }
  int64_t n = rows[0]->val().shape.back();
  for (TapeNode *r : rows) {
    CheckRank1("stack_rows", r->val());
    if (r->val().shape[0] != n) ShapeError("stack_rows", rows[0]->val(), r->val());
  }
  int64_t m = static_cast<int64_t>(rows.size());
  Tensor out({m, n});
  for (int64_t r = 0; r < m; ++r) {
    std::copy(rows[r]->val().v.begin(), rows[r]->val().v.end(),
              out.v.begin() + r * n);
  }
  std::vector<TapeNode *> parents = rows;
  return MakeNode(std::move(out), parents,
                  [parents, m, n](TapeNode *self) {
                    const auto &g = self->grad.v;
                    for (int64_t r = 0; r < m; ++r) {
                      TapeNode *p = parents[r];
                      if (!p->requires_grad) continue;
                      auto &gp = p->GradBuf().v;
                      for (int64_t j = 0; j < n; ++j) gp[j] += g[r * n + j];
                    }
                  });
}

TapeNode *Tape::PadColZero(TapeNode *a) {
  CheckRank2("pad_col_zero", a->val());
  const Tensor &av = a->val();
  int64_t m = av.shape[0], n = av.shape[1];
  Tensor out({m, n + 1});
  for (int64_t r = 0; r < m; ++r) {
    for (int64_t j = 0; j < n; ++j) out.v[r * (n + 1) + j] = av.v[r * n + j];
    out.v[r * (n + 1) + n] = 0.0;
  }
  return MakeNode(std::move(out), {a}, [a, m, n](TapeNode *self) {
    if (!a->requires_grad) return;
    auto &ga = a->GradBuf().v;
    const auto &g = self->grad.v;
    for (int64_t r = 0; r < m; ++r) {
      for (int64_t j = 0; j < n; ++j) ga[r * n + j] += g[r * (n + 1) + j];
    }
  });
}

namespace {

// Writes log-softmax of in[0..n) into out[0..n); max-subtraction for
// stability. Throws on non-finite input.
void LogSoftmaxRow(const double *in, double *out, int64_t n) {
  double mx = in[0];
  for (int64_t i = 0; i < n; ++i) {
    if (!std::isfinite(in[i])) {
      throw std::invalid_argument("log_softmax: non-finite input");
    }
    mx = std::max(mx, in[i]);
  }
  double denom = 0.0;
  for (int64_t i = 0; i < n; ++i) denom += std::exp(in[i] - mx);
  double log_denom = mx + std::log(denom);
  for (int64_t i = 0; i < n; ++i) out[i] = in[i] - log_denom;
}

// d log_softmax: dx = g - softmax * sum(g)
void LogSoftmaxRowBackward(const double *y, const double *g, double *gx,
                           int64_t n) {
  double gsum = 0.0;
  for (int64_t i = 0; i < n; ++i) gsum += g[i];
  for (int64_t i = 0; i < n; ++i) gx[i] += g[i] - std::exp(y[i]) * gsum;
}

}  // namespace

TapeNode *Tape::LogSoftmax(TapeNode *a) {
  CheckRank1("log_softmax", a->val());
  int64_t n = a->val().shape[0];
  Tensor out({n});
  LogSoftmaxRow(a->val().v.data(), out.v.data(), n);
  return MakeNode(std::move(out), {a}, [a, n](TapeNode *self) {
    if (!a->requires_grad) return;
    LogSoftmaxRowBackward(self->val().v.data(), self->grad.v.data(),
                          a->GradBuf().v.data(), n);
  });
}

TapeNode *Tape::LogSoftmaxRows(TapeNode *a) {
  CheckRank2("log_softmax_rows", a->val());
  int64_t m = a->val().shape[0], n = a->val().shape[1];
  Tensor out({m, n});
  for (int64_t r = 0; r < m; ++r) {
    LogSoftmaxRow(&a->val().v[r * n], &out.v[r * n], n);
  }
  return MakeNode(std::move(out), {a}, [a, m, n](TapeNode *self) {
    if (!a->requires_grad) return;
    auto &ga = a->GradBuf().v;
    for (int64_t r = 0; r < m; ++r) {
      LogSoftmaxRowBackward(&self->val().v[r * n], &self->grad.v[r * n],
                            &ga[r * n], n);
    }
  });
}

TapeNode *Tape::MeanNllRows(TapeNode *logprobs,
                            const std::vector<int64_t> &ids) {
  CheckRank2("mean_nll_rows", logprobs->val());
  const Tensor &lp = logprobs->val();
  int64_t m = lp.shape[0], n = lp.shape[1];
  if (static_cast<int64_t>(ids.size()) != m) {
    throw std::invalid_argument("mean_nll_rows: ids length != rows");
  }
  double s = 0.0;
  for (int64_t r = 0; r < m; ++r) {
    if (ids[r] < 0 || ids[r] >= n) {
      throw std::invalid_argument("mean_nll_rows: id out of range");
    }
    s -= lp.v[r * n + ids[r]];
  }
  s /= static_cast<double>(m);
  return MakeNode(Tensor::Scalar(s), {logprobs},
                  [logprobs, ids, m, n](TapeNode *self) {
                    if (!logprobs->requires_grad) return;
                    auto &g = logprobs->GradBuf().v;
                    double up = self->grad.v[0] / static_cast<double>(m);
                    for (int64_t r = 0; r < m; ++r) {
                      g[r * n + ids[r]] -= up;
                    }
                  });
}

void Tape::Backward(TapeNode *loss) {
  if (loss == nullptr || loss->tape != this) {
    throw std::invalid_argument("backward: loss is not on this tape");
  }
  if (!loss->val().IsScalar()) {
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                loss->val().ShapeStr());
  }
  // Leaf gradients accumulate across calls; interior gradients are
  // per-pass scratch and must start from zero.
  for (int64_t i = 0; i <= loss->id; ++i) {
    TapeNode &n = nodes_[i];
    if (n.backward && n.HasGrad()) {
      std::fill(n.grad.v.begin(), n.grad.v.end(), 0.0);
    }
  }
  loss->GradBuf().v[0] += 1.0;
  for (int64_t i = loss->id; i >= 0; --i) {
    TapeNode &n = nodes_[i];
    if (n.requires_grad && n.HasGrad() && n.backward) {
      n.backward(&n);
    }
  }
}

}  // namespace rnnt
