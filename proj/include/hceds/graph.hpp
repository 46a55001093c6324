#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hceds/tensor.hpp"

namespace hceds {

/// Reverse-mode tape over the fixed set of operations the encoder needs.
///
/// Every op computes its forward value eagerly and, when the graph records
/// gradients, pushes a closure that accumulates input gradients from the
/// output gradient. Parameters bound with param() receive their gradient
/// (accumulated with +=) when backward() reaches the leaf.
class Graph {
 public:
  struct Var {
    std::uint32_t id = UINT32_MAX;
    bool valid() const { return id != UINT32_MAX; }
  };

  explicit Graph(bool record_gradients = true) : record_(record_gradients) { nodes_.reserve(256); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var input(Tensor t);
  /// Trainable leaf; backward() adds into p.grad.
  Var param(Parameter& p);
  /// Read-only leaf referring to p's value without copying it.
  Var frozen(const Parameter& p);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() target w.r.t. v (empty tensor when none flowed).
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every recorded input.
  void backward(Var loss);

  Var affine(Var x, Var W, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  /// Elementwise product with a constant (dropout masks).
  Var mul_const(Var x, Tensor c);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var concat(std::span<const Var> parts);
  Var slice(Var x, std::size_t offset, std::size_t length);
  Var softmax(Var x);
  /// Scalar sum_i c_i * x_i.
  Var dot_const(Var x, Tensor c);
  /// Mean of scalar nodes.
  Var mean(std::span<const Var> scalars);
  Var scale(Var x, double s);

  /// Fused LSTM cell; value is [h'; c'] (2H). Gate order i, f, g, o.
  Var lstm_cell(Var x, Var h, Var c, Var W, Var b);

  /// Width-k convolution over embedded characters (one zero pad each side),
  /// tanh, then max over windows centred on real characters. Ids equal to
  /// pad_id are treated as trailing padding and never become window centres.
  Var char_conv_maxpool(Var table, std::span<const int> char_ids, int pad_id, Var W, Var b);

  struct Attention {
    Var context;
    Tensor weights;
  };
  /// score_i = query^T M key_i; weights = softmax(scores); context = sum_i w_i key_i.
  Attention bilinear_attention(Var query, std::span<const Var> keys, Var M);

  /// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets.
  Var bce_loss(Var logits, Tensor targets);
  /// Mean over steps of -log softmax(logits_t)[gold_t].
  Var xent_loss(std::span<const Var> logits, std::span<const std::size_t> gold);

 private:
  struct Node {
    Tensor own;
    const Tensor* ext = nullptr;
    Tensor grad;
    Parameter* target = nullptr;
    bool requires_grad = false;
    std::function<void(Graph&, std::uint32_t)> backward;
  };

  Var push(Tensor value, bool requires_grad, std::function<void(Graph&, std::uint32_t)> backward);
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }
  Tensor& grad_ref(Var v);
  const Tensor& out_grad(std::uint32_t self) const { return nodes_[self].grad; }

  bool record_;
  std::vector<Node> nodes_;
};

/// Weights of one unidirectional LSTM: W is 4H x (I + H), b is 4H.
struct LstmParams {
  Parameter W;
  Parameter b;
  std::size_t input = 0;
  std::size_t hidden = 0;

  static LstmParams create(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng);
};

struct BiLstmParams {
  LstmParams fwd;
  LstmParams bwd;

  static BiLstmParams create(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng);
  std::size_t output_dim() const { return 2 * fwd.hidden; }
};

/// LSTM weights bound as graph leaves.
struct LstmVars {
  Graph::Var W;
  Graph::Var b;
  std::size_t hidden = 0;
};

LstmVars bind(Graph& g, LstmParams& p);
LstmVars bind(Graph& g, const LstmParams& p);

struct LstmState {
  Graph::Var h;
  Graph::Var c;
};

LstmState lstm_step(Graph& g, Graph::Var x, LstmState prev, const LstmVars& p);

/// output[t] = forward_h[t] (+) backward_h[t]. Throws on an empty sequence.
std::vector<Graph::Var> bilstm_encode(Graph& g, std::span<const Graph::Var> seq, const LstmVars& fwd,
                                      const LstmVars& bwd);

}  // namespace hceds
