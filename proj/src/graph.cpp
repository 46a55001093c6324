#include "hceds/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace hceds {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;

Eigen::Index ix(std::size_t n) { return static_cast<Eigen::Index>(n); }

CMatMap mat(const Tensor& t) { return CMatMap(t.data(), ix(t.rows()), ix(t.cols())); }
MatMap mat(Tensor& t) { return MatMap(t.data(), ix(t.rows()), ix(t.cols())); }
CVecMap vec(const Tensor& t) { return CVecMap(t.data(), ix(t.size())); }
VecMap vec(Tensor& t) { return VecMap(t.data(), ix(t.size())); }

void expect_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": operand shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  }
}

}  // namespace

Graph::Var Graph::push(Tensor value, bool requires_grad, std::function<void(Graph&, std::uint32_t)> backward) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = record_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Graph::grad_ref(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) n.grad = Tensor::zeros_like(n.ext ? *n.ext : n.own);
  return n.grad;
}

const Tensor& Graph::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.ext ? *n.ext : n.own;
}

Graph::Var Graph::input(Tensor t) { return push(std::move(t), false, nullptr); }

Graph::Var Graph::param(Parameter& p) {
  Node n;
  n.ext = &p.value;
  n.target = record_ ? &p : nullptr;
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Graph::Var Graph::frozen(const Parameter& p) {
  Node n;
  n.ext = &p.value;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Graph::backward(Var loss) {
  if (!record_) throw ParameterError("backward: graph was built without gradient recording");
  if (value(loss).size() != 1) throw ShapeError("backward: loss must be a scalar, got " + shape_string(value(loss).shape()));
  grad_ref(loss).fill(1.0);
  for (std::int64_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, static_cast<std::uint32_t>(i));
    if (n.target) vec(n.target->grad) += vec(n.grad);
  }
}

Graph::Var Graph::affine(Var x, Var W, Var b) {
  Tensor y = hceds::affine(value(x), value(W), value(b));
  const bool rg = needs(x) || needs(W) || needs(b);
  return push(std::move(y), rg, [x, W, b](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.out_grad(self);
    if (g.needs(b)) vec(g.grad_ref(b)) += vec(dy);
    if (g.needs(W)) mat(g.grad_ref(W)).noalias() += vec(dy) * vec(g.value(x)).transpose();
    if (g.needs(x)) vec(g.grad_ref(x)).noalias() += mat(g.value(W)).transpose() * vec(dy);
  });
}

Graph::Var Graph::add(Var a, Var b) {
  expect_same(value(a), value(b), "add");
  Tensor y = value(a);
  vec(y) += vec(value(b));
  return push(std::move(y), needs(a) || needs(b), [a, b](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.out_grad(self);
    if (g.needs(a)) vec(g.grad_ref(a)) += vec(dy);
    if (g.needs(b)) vec(g.grad_ref(b)) += vec(dy);
  });
}

Graph::Var Graph::mul(Var a, Var b) {
  expect_same(value(a), value(b), "mul");
  Tensor y = value(a);
  vec(y) = vec(y).cwiseProduct(vec(value(b)));
  return push(std::move(y), needs(a) || needs(b), [a, b](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.out_grad(self);
    if (g.needs(a)) vec(g.grad_ref(a)) += vec(dy).cwiseProduct(vec(g.value(b)));
    if (g.needs(b)) vec(g.grad_ref(b)) += vec(dy).cwiseProduct(vec(g.value(a)));
  });
}

Graph::Var Graph::mul_const(Var x, Tensor c) {
  expect_same(value(x), c, "mul_const");
  Tensor y = value(x);
  vec(y) = vec(y).cwiseProduct(vec(c));
  return push(std::move(y), needs(x), [x, c = std::move(c)](Graph& g, std::uint32_t self) {
    vec(g.grad_ref(x)) += vec(g.out_grad(self)).cwiseProduct(vec(c));
  });
}

Graph::Var Graph::scale(Var x, double s) {
  Tensor y = value(x);
  vec(y) *= s;
  return push(std::move(y), needs(x),
              [x, s](Graph& g, std::uint32_t self) { vec(g.grad_ref(x)) += s * vec(g.out_grad(self)); });
}

Graph::Var Graph::tanh(Var x) {
  Tensor y = value(x);
  for (auto& v : y.values()) v = std::tanh(v);
  return push(std::move(y), needs(x), [x](Graph& g, std::uint32_t self) {
    const Tensor& y = g.value(Var{self});
    const Tensor& dy = g.out_grad(self);
    Tensor& dx = g.grad_ref(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
  });
}

Graph::Var Graph::sigmoid(Var x) {
  Tensor y = value(x);
  for (auto& v : y.values()) v = hceds::sigmoid(v);
  return push(std::move(y), needs(x), [x](Graph& g, std::uint32_t self) {
    const Tensor& y = g.value(Var{self});
    const Tensor& dy = g.out_grad(self);
    Tensor& dx = g.grad_ref(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Graph::Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  std::vector<double> out;
  bool rg = false;
  for (Var p : parts) {
    const auto& v = value(p).values();
    out.insert(out.end(), v.begin(), v.end());
    rg = rg || needs(p);
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return push(Tensor::vector(std::move(out)), rg, [ps = std::move(ps)](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.out_grad(self);
    std::size_t off = 0;
    for (Var p : ps) {
      const std::size_t n = g.value(p).size();
      if (g.needs(p)) vec(g.grad_ref(p)) += CVecMap(dy.data() + off, ix(n));
      off += n;
    }
  });
}

Graph::Var Graph::slice(Var x, std::size_t offset, std::size_t length) {
  const Tensor& v = value(x);
  if (length == 0 || offset + length > v.size()) {
    throw ShapeError("slice: [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of range for " + shape_string(v.shape()));
  }
  std::vector<double> out(v.data() + offset, v.data() + offset + length);
  return push(Tensor::vector(std::move(out)), needs(x), [x, offset, length](Graph& g, std::uint32_t self) {
    VecMap(g.grad_ref(x).data() + offset, ix(length)) += vec(g.out_grad(self));
  });
}

Graph::Var Graph::softmax(Var x) {
  Tensor y = hceds::softmax(value(x).span());
  return push(std::move(y), needs(x), [x](Graph& g, std::uint32_t self) {
    const Tensor& y = g.value(Var{self});
    const Tensor& dy = g.out_grad(self);
    const double inner = vec(y).dot(vec(dy));
    Tensor& dx = g.grad_ref(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += y[i] * (dy[i] - inner);
  });
}

Graph::Var Graph::dot_const(Var x, Tensor c) {
  expect_same(value(x), c, "dot_const");
  const double s = vec(value(x)).dot(vec(c));
  return push(Tensor::vector({s}), needs(x), [x, c = std::move(c)](Graph& g, std::uint32_t self) {
    vec(g.grad_ref(x)) += g.out_grad(self)[0] * vec(c);
  });
}

Graph::Var Graph::mean(std::span<const Var> scalars) {
  if (scalars.empty()) throw ShapeError("mean: no operands");
  double s = 0.0;
  bool rg = false;
  for (Var v : scalars) {
    if (value(v).size() != 1) throw ShapeError("mean: operand is not a scalar");
    s += value(v)[0];
    rg = rg || needs(v);
  }
  const double n = static_cast<double>(scalars.size());
  std::vector<Var> vs(scalars.begin(), scalars.end());
  return push(Tensor::vector({s / n}), rg, [vs = std::move(vs), n](Graph& g, std::uint32_t self) {
    const double d = g.out_grad(self)[0] / n;
    for (Var v : vs) {
      if (g.needs(v)) g.grad_ref(v)[0] += d;
    }
  });
}

Graph::Var Graph::lstm_cell(Var x, Var h, Var c, Var W, Var b) {
  const Tensor& xv = value(x);
  const Tensor& hv = value(h);
  const Tensor& cv = value(c);
  const Tensor& Wv = value(W);
  const std::size_t H = hv.size();
  const std::size_t I = xv.size();
  if (cv.size() != H || Wv.rank() != 2 || Wv.rows() != 4 * H || Wv.cols() != I + H || value(b).size() != 4 * H) {
    throw ShapeError("lstm_cell: x" + shape_string(xv.shape()) + " h" + shape_string(hv.shape()) + " c" +
                     shape_string(cv.shape()) + " W" + shape_string(Wv.shape()) + " b" +
                     shape_string(value(b).shape()));
  }
  Tensor xh({I + H});
  std::copy(xv.values().begin(), xv.values().end(), xh.values().begin());
  std::copy(hv.values().begin(), hv.values().end(), xh.values().begin() + static_cast<std::ptrdiff_t>(I));
  Tensor gates = hceds::affine(xh, Wv, value(b));
  for (std::size_t k = 0; k < H; ++k) {
    gates[k] = hceds::sigmoid(gates[k]);
    gates[H + k] = hceds::sigmoid(gates[H + k]);
    gates[2 * H + k] = std::tanh(gates[2 * H + k]);
    gates[3 * H + k] = hceds::sigmoid(gates[3 * H + k]);
  }
  Tensor out({2 * H});
  Tensor tanh_c({H});
  for (std::size_t k = 0; k < H; ++k) {
    const double cn = gates[H + k] * cv[k] + gates[k] * gates[2 * H + k];
    tanh_c[k] = std::tanh(cn);
    out[H + k] = cn;
    out[k] = gates[3 * H + k] * tanh_c[k];
  }
  const bool rg = needs(x) || needs(h) || needs(c) || needs(W) || needs(b);
  if (!record_ || !rg) return push(std::move(out), false, nullptr);
  return push(std::move(out), true,
              [x, h, c, W, b, H, I, xh = std::move(xh), gates = std::move(gates), tanh_c = std::move(tanh_c)](
                  Graph& g, std::uint32_t self) {
                const Tensor& dout = g.out_grad(self);
                const Tensor& cprev = g.value(c);
                Tensor dz({4 * H});
                Tensor dcprev({H});
                for (std::size_t k = 0; k < H; ++k) {
                  const double i = gates[k], f = gates[H + k], gg = gates[2 * H + k], o = gates[3 * H + k];
                  const double dh = dout[k];
                  const double dc = dout[H + k] + dh * o * (1.0 - tanh_c[k] * tanh_c[k]);
                  dz[k] = dc * gg * i * (1.0 - i);
                  dz[H + k] = dc * cprev[k] * f * (1.0 - f);
                  dz[2 * H + k] = dc * i * (1.0 - gg * gg);
                  dz[3 * H + k] = dh * tanh_c[k] * o * (1.0 - o);
                  dcprev[k] = dc * f;
                }
                if (g.needs(c)) vec(g.grad_ref(c)) += vec(dcprev);
                if (g.needs(b)) vec(g.grad_ref(b)) += vec(dz);
                if (g.needs(W)) mat(g.grad_ref(W)).noalias() += vec(dz) * vec(xh).transpose();
                if (g.needs(x) || g.needs(h)) {
                  Eigen::VectorXd dxh = mat(g.value(W)).transpose() * vec(dz);
                  if (g.needs(x)) vec(g.grad_ref(x)) += dxh.head(ix(I));
                  if (g.needs(h)) vec(g.grad_ref(h)) += dxh.tail(ix(H));
                }
              });
}

Graph::Var Graph::char_conv_maxpool(Var table, std::span<const int> char_ids, int pad_id, Var W, Var b) {
  const Tensor& T = value(table);
  const Tensor& Wv = value(W);
  const std::size_t dim = T.cols();
  const std::size_t filters = Wv.rows();
  if (Wv.rank() != 2 || Wv.cols() != 3 * dim || value(b).size() != filters) {
    throw ShapeError("char_conv_maxpool: table" + shape_string(T.shape()) + " W" + shape_string(Wv.shape()) + " b" +
                     shape_string(value(b).shape()));
  }
  std::size_t len = char_ids.size();
  while (len > 0 && char_ids[len - 1] == pad_id) --len;
  std::vector<int> ids(char_ids.begin(), char_ids.begin() + static_cast<std::ptrdiff_t>(len));
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= T.rows()) {
      throw ShapeError("char_conv_maxpool: char id " + std::to_string(id) + " outside table");
    }
  }
  Tensor out({filters});
  if (len == 0) return push(std::move(out), false, nullptr);

  // window(p) = [e(p-1); e(p); e(p+1)] with zero vectors outside the word
  auto window = [&](std::size_t p) {
    Tensor w({3 * dim});
    for (int k = -1; k <= 1; ++k) {
      const auto q = static_cast<std::ptrdiff_t>(p) + k;
      if (q < 0 || q >= static_cast<std::ptrdiff_t>(len) || ids[static_cast<std::size_t>(q)] == pad_id) continue;
      const double* row = T.data() + static_cast<std::size_t>(ids[static_cast<std::size_t>(q)]) * dim;
      std::copy(row, row + dim, w.data() + static_cast<std::size_t>(k + 1) * dim);
    }
    return w;
  };
  std::vector<std::size_t> argmax(filters, 0);
  std::vector<Tensor> windows;
  windows.reserve(len);
  for (std::size_t p = 0; p < len; ++p) {
    windows.push_back(window(p));
    Tensor r = hceds::affine(windows.back(), Wv, value(b));
    for (std::size_t f = 0; f < filters; ++f) {
      const double a = std::tanh(r[f]);
      if (p == 0 || a > out[f]) {
        out[f] = a;
        argmax[f] = p;
      }
    }
  }
  const bool rg = needs(table) || needs(W) || needs(b);
  if (!record_ || !rg) return push(std::move(out), false, nullptr);
  return push(std::move(out), true,
              [table, W, b, dim, filters, len, ids = std::move(ids), pad_id, argmax = std::move(argmax),
               windows = std::move(windows)](Graph& g, std::uint32_t self) {
                const Tensor& y = g.value(Var{self});
                const Tensor& dy = g.out_grad(self);
                const Tensor& Wv = g.value(W);
                for (std::size_t f = 0; f < filters; ++f) {
                  const double dr = dy[f] * (1.0 - y[f] * y[f]);
                  if (dr == 0.0) continue;
                  const std::size_t p = argmax[f];
                  if (g.needs(b)) g.grad_ref(b)[f] += dr;
                  if (g.needs(W)) {
                    Tensor& dW = g.grad_ref(W);
                    for (std::size_t j = 0; j < 3 * dim; ++j) dW.at(f, j) += dr * windows[p][j];
                  }
                  if (g.needs(table)) {
                    Tensor& dT = g.grad_ref(table);
                    for (int k = -1; k <= 1; ++k) {
                      const auto q = static_cast<std::ptrdiff_t>(p) + k;
                      if (q < 0 || q >= static_cast<std::ptrdiff_t>(len)) continue;
                      const int id = ids[static_cast<std::size_t>(q)];
                      if (id == pad_id) continue;
                      for (std::size_t j = 0; j < dim; ++j) {
                        dT.at(static_cast<std::size_t>(id), j) += dr * Wv.at(f, static_cast<std::size_t>(k + 1) * dim + j);
                      }
                    }
                  }
                }
              });
}

Graph::Attention Graph::bilinear_attention(Var query, std::span<const Var> keys, Var M) {
  if (keys.empty()) throw ShapeError("bilinear_attention: empty key sequence");
  const Tensor& q = value(query);
  const Tensor& Mv = value(M);
  const std::size_t kd = value(keys[0]).size();
  if (Mv.rank() != 2 || Mv.rows() != q.size() || Mv.cols() != kd) {
    throw ShapeError("bilinear_attention: query" + shape_string(q.shape()) + " M" + shape_string(Mv.shape()) +
                     " key dim " + std::to_string(kd));
  }
  Eigen::VectorXd u = mat(Mv).transpose() * vec(q);
  std::vector<double> scores(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (value(keys[i]).size() != kd) throw ShapeError("bilinear_attention: keys have inconsistent dimensions");
    scores[i] = u.dot(vec(value(keys[i])));
  }
  Tensor w = hceds::softmax(scores);
  Tensor ctx({kd});
  for (std::size_t i = 0; i < keys.size(); ++i) vec(ctx) += w[i] * vec(value(keys[i]));

  bool rg = needs(query) || needs(M);
  for (Var k : keys) rg = rg || needs(k);
  Attention out;
  out.weights = w;
  if (!record_ || !rg) {
    out.context = push(std::move(ctx), false, nullptr);
    return out;
  }
  std::vector<Var> ks(keys.begin(), keys.end());
  out.context = push(std::move(ctx), true,
                     [query, M, ks = std::move(ks), w = std::move(w), u = std::move(u)](Graph& g, std::uint32_t self) {
                       const Tensor& dctx = g.out_grad(self);
                       const std::size_t n = ks.size();
                       std::vector<double> dw(n);
                       double inner = 0.0;
                       for (std::size_t i = 0; i < n; ++i) {
                         dw[i] = vec(dctx).dot(vec(g.value(ks[i])));
                         inner += w[i] * dw[i];
                       }
                       Eigen::VectorXd du = Eigen::VectorXd::Zero(u.size());
                       for (std::size_t i = 0; i < n; ++i) {
                         const double ds = w[i] * (dw[i] - inner);
                         du += ds * vec(g.value(ks[i]));
                         if (g.needs(ks[i])) vec(g.grad_ref(ks[i])) += w[i] * vec(dctx) + ds * u;
                       }
                       if (g.needs(query)) vec(g.grad_ref(query)).noalias() += mat(g.value(M)) * du;
                       if (g.needs(M)) mat(g.grad_ref(M)).noalias() += vec(g.value(query)) * du.transpose();
                     });
  return out;
}

Graph::Var Graph::bce_loss(Var logits, Tensor targets) {
  const Tensor& z = value(logits);
  const double loss = multilabel_bce(z.span(), targets.span());
  return push(Tensor::vector({loss}), needs(logits), [logits, t = std::move(targets)](Graph& g, std::uint32_t self) {
    const Tensor& z = g.value(logits);
    const double d = g.out_grad(self)[0] / static_cast<double>(z.size());
    Tensor& dz = g.grad_ref(logits);
    for (std::size_t i = 0; i < z.size(); ++i) dz[i] += d * (hceds::sigmoid(z[i]) - t[i]);
  });
}

Graph::Var Graph::xent_loss(std::span<const Var> logits, std::span<const std::size_t> gold) {
  if (logits.size() != gold.size() || logits.empty()) {
    throw ShapeError("xent_loss: " + std::to_string(logits.size()) + " steps vs " + std::to_string(gold.size()) +
                     " gold tags");
  }
  double total = 0.0;
  std::vector<Tensor> probs;
  probs.reserve(logits.size());
  bool rg = false;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    const Tensor& z = value(logits[t]);
    if (gold[t] >= z.size()) {
      throw std::out_of_range("xent_loss: gold tag " + std::to_string(gold[t]) + " out of range for " +
                              std::to_string(z.size()) + " tags");
    }
    const double m = *std::max_element(z.values().begin(), z.values().end());
    double s = 0.0;
    for (double v : z.values()) s += std::exp(v - m);
    total += -(z[gold[t]] - m - std::log(s));
    probs.push_back(hceds::softmax(z.span()));
    rg = rg || needs(logits[t]);
  }
  const double n = static_cast<double>(logits.size());
  std::vector<Var> ls(logits.begin(), logits.end());
  std::vector<std::size_t> gs(gold.begin(), gold.end());
  return push(Tensor::vector({total / n}), rg,
              [ls = std::move(ls), gs = std::move(gs), probs = std::move(probs), n](Graph& g, std::uint32_t self) {
                const double d = g.out_grad(self)[0] / n;
                for (std::size_t t = 0; t < ls.size(); ++t) {
                  if (!g.needs(ls[t])) continue;
                  Tensor& dz = g.grad_ref(ls[t]);
                  for (std::size_t k = 0; k < dz.size(); ++k) dz[k] += d * (probs[t][k] - (k == gs[t] ? 1.0 : 0.0));
                }
              });
}

LstmParams LstmParams::create(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng) {
  LstmParams p;
  p.input = input;
  p.hidden = hidden;
  p.W = make_weight(name + ".W", 4 * hidden, input + hidden, rng);
  p.b = make_bias(name + ".b", 4 * hidden);
  for (std::size_t k = hidden; k < 2 * hidden; ++k) p.b.value[k] = 1.0;  // forget gate
  return p;
}

BiLstmParams BiLstmParams::create(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng) {
  return BiLstmParams{LstmParams::create(name + ".fwd", input, hidden, rng),
                      LstmParams::create(name + ".bwd", input, hidden, rng)};
}

LstmVars bind(Graph& g, LstmParams& p) { return LstmVars{g.param(p.W), g.param(p.b), p.hidden}; }
LstmVars bind(Graph& g, const LstmParams& p) { return LstmVars{g.frozen(p.W), g.frozen(p.b), p.hidden}; }

LstmState lstm_step(Graph& g, Graph::Var x, LstmState prev, const LstmVars& p) {
  Graph::Var cell = g.lstm_cell(x, prev.h, prev.c, p.W, p.b);
  return LstmState{g.slice(cell, 0, p.hidden), g.slice(cell, p.hidden, p.hidden)};
}

std::vector<Graph::Var> bilstm_encode(Graph& g, std::span<const Graph::Var> seq, const LstmVars& fwd,
                                      const LstmVars& bwd) {
  if (seq.empty()) throw ShapeError("bilstm_encode: empty input sequence");
  const std::size_t n = seq.size();
  std::vector<Graph::Var> fh(n), bh(n);
  LstmState s{g.input(Tensor({fwd.hidden})), g.input(Tensor({fwd.hidden}))};
  for (std::size_t t = 0; t < n; ++t) {
    s = lstm_step(g, seq[t], s, fwd);
    fh[t] = s.h;
  }
  s = LstmState{g.input(Tensor({bwd.hidden})), g.input(Tensor({bwd.hidden}))};
  for (std::size_t t = n; t-- > 0;) {
    s = lstm_step(g, seq[t], s, bwd);
    bh[t] = s.h;
  }
  std::vector<Graph::Var> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Graph::Var parts[2] = {fh[t], bh[t]};
    out[t] = g.concat(parts);
  }
  return out;
}

}  // namespace hceds
