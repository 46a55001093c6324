#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "hceds/checkpoint.hpp"
#include "hceds/graph.hpp"
#include "hceds/optim.hpp"
#include "test_support.hpp"

using namespace hceds;
using hceds::testing::random_param;
using hceds::testing::random_tensor;

namespace {

// Independent BCE: -[y log s + (1-y) log(1-s)] with the plain logistic.
double naive_bce(const std::vector<double>& z, const std::vector<double>& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const long double s = 1.0L / (1.0L + std::exp(-static_cast<long double>(z[i])));
    total += static_cast<double>(-(y[i] * std::log(s) + (1.0L - y[i]) * std::log(1.0L - s)));
  }
  return total / static_cast<double>(z.size());
}

std::vector<double> swap_halves(const Tensor& t) {
  const std::size_t h = t.size() / 2;
  std::vector<double> out(t.values().begin() + static_cast<std::ptrdiff_t>(h), t.values().end());
  out.insert(out.end(), t.values().begin(), t.values().begin() + static_cast<std::ptrdiff_t>(h));
  return out;
}

}  // namespace

TEST_CASE("affine forward cases") {
  Graph g(false);
  Parameter I("I", Tensor({2, 2}, {1, 0, 0, 1}));
  Parameter z("z", Tensor({2}));
  auto y = g.affine(g.input(Tensor::vector({3, -1})), g.frozen(I), g.frozen(z));
  CHECK(g.value(y).values() == std::vector<double>{3, -1});

  Parameter W0("W0", Tensor({2, 2}));
  Parameter b5("b5", Tensor::vector({5, 5}));
  auto y2 = g.affine(g.input(Tensor::vector({7, -9})), g.frozen(W0), g.frozen(b5));
  CHECK(g.value(y2).values() == std::vector<double>{5, 5});

  Parameter bad("bad", Tensor({3, 3}));
  CHECK_THROWS_AS(g.affine(g.input(Tensor::vector({1, 2})), g.frozen(bad), g.frozen(z)), ShapeError);
  try {
    g.affine(g.input(Tensor::vector({1, 2})), g.frozen(bad), g.frozen(z));
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("W[3x3]") != std::string::npos);
  }
}

TEST_CASE("affine gradient matches central differences") {
  Rng rng(11);
  auto W = random_param("W", {4, 3}, rng);
  auto b = random_param("b", {4}, rng);
  auto x = random_param("x", {3}, rng);
  Parameter* ps[] = {&W, &b, &x};
  auto loss = [&](bool grad) {
    Graph g(grad);
    auto y = g.affine(g.param(x), g.param(W), g.param(b));
    auto s = g.dot_const(y, Tensor({4}, 1.0));
    if (grad) g.backward(s);
    return g.value(s)[0];
  };
  auto rep = gradcheck(loss, ps, 1e-5);
  CHECK(rep.finite);
  CHECK(rep.max_relative_error < 1e-6);
  CHECK(rep.max_relative_error < 1e-8);
}

TEST_CASE("softmax") {
  auto u = softmax(std::vector<double>{0, 0, 0});
  for (double v : u.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

  auto big = softmax(std::vector<double>{1000, 0});
  CHECK(big[0] == 1.0);
  CHECK(big[1] == doctest::Approx(0.0));
  CHECK(big.all_finite());

  // 40-digit reference values of exp(k)/sum exp.
  auto s = softmax(std::vector<double>{1, 2, 3});
  CHECK(std::abs(s[0] - 0.090030573170380457998) < 1e-15);
  CHECK(std::abs(s[1] - 0.24472847105479765247) < 1e-15);
  CHECK(std::abs(s[2] - 0.66524095577482188953) < 1e-15);

  CHECK_THROWS_AS(softmax(std::vector<double>{}), ShapeError);

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = random_tensor({7}, rng, 20.0);
    auto a = softmax(x.span());
    auto shifted = x;
    for (auto& v : shifted.values()) v += 123.25;
    auto b = softmax(shifted.span());
    const double sum = std::accumulate(a.values().begin(), a.values().end(), 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-12);
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(a[i] > 0.0);
      CHECK(std::abs(a[i] - b[i]) < 1e-12);
    }
  }
}

TEST_CASE("softmax gradient") {
  Rng rng(5);
  auto x = random_param("x", {5}, rng, 2.0);
  auto w = random_tensor({5}, rng);
  Parameter* ps[] = {&x};
  auto rep = gradcheck(
      [&](bool grad) {
        Graph g(grad);
        auto s = g.dot_const(g.softmax(g.param(x)), w);
        if (grad) g.backward(s);
        return g.value(s)[0];
      },
      ps, 1e-5);
  CHECK(rep.max_relative_error < 1e-4);
}

TEST_CASE("lstm_step cases") {
  SUBCASE("all zero") {
    Graph g(false);
    Parameter W("W", Tensor({12, 5})), b("b", Tensor({12}));
    auto s = lstm_step(g, g.input(Tensor({2})), {g.input(Tensor({3})), g.input(Tensor({3}))},
                       LstmVars{g.frozen(W), g.frozen(b), 3});
    for (double v : g.value(s.h).values()) CHECK(v == 0.0);
    for (double v : g.value(s.c).values()) CHECK(v == 0.0);
  }
  SUBCASE("forget saturated carries the cell") {
    Rng rng(2);
    const std::size_t H = 3;
    Parameter W("W", Tensor({4 * H, 2 + H}));
    Parameter b("b", Tensor({4 * H}));
    for (std::size_t k = 0; k < H; ++k) {
      b.value[k] = -800.0;      // input gate -> 0
      b.value[H + k] = 800.0;   // forget gate -> 1
    }
    Graph g(false);
    auto c = random_tensor({H}, rng);
    auto s = lstm_step(g, g.input(random_tensor({2}, rng)), {g.input(random_tensor({H}, rng)), g.input(c)},
                       LstmVars{g.frozen(W), g.frozen(b), H});
    CHECK(g.value(s.c) == c);
    for (double v : g.value(s.h).values()) CHECK(std::abs(v) < 1.0);
  }
  SUBCASE("shape error") {
    Graph g(false);
    Parameter W("W", Tensor({12, 4})), b("b", Tensor({12}));
    CHECK_THROWS_AS(lstm_step(g, g.input(Tensor({2})), {g.input(Tensor({3})), g.input(Tensor({3}))},
                              LstmVars{g.frozen(W), g.frozen(b), 3}),
                    ShapeError);
  }
}

TEST_CASE("lstm_step gradient on every parameter") {
  Rng rng(21);
  const std::size_t I = 3, H = 4;
  auto lp = LstmParams::create("cell", I, H, rng);
  auto x = random_param("x", {I}, rng);
  auto h = random_param("h", {H}, rng);
  auto c = random_param("c", {H}, rng);
  auto wh = random_tensor({H}, rng);
  auto wc = random_tensor({H}, rng);
  Parameter* ps[] = {&lp.W, &lp.b, &x, &h, &c};
  auto rep = gradcheck(
      [&](bool grad) {
        Graph g(grad);
        auto s = lstm_step(g, g.param(x), {g.param(h), g.param(c)}, bind(g, lp));
        Graph::Var parts[] = {g.dot_const(s.h, wh), g.dot_const(s.c, wc)};
        auto loss = g.mean(parts);
        if (grad) g.backward(loss);
        return g.value(loss)[0];
      },
      ps, 1e-5);
  CHECK(rep.max_relative_error < 1e-4);
}

TEST_CASE("bilstm_encode") {
  Rng rng(8);
  const std::size_t I = 3, H = 2;
  auto p = BiLstmParams::create("bi", I, H, rng);

  SUBCASE("length one") {
    Graph g(false);
    auto x = g.input(random_tensor({I}, rng));
    Graph::Var seq[] = {x};
    auto out = bilstm_encode(g, seq, bind(g, std::as_const(p.fwd)), bind(g, std::as_const(p.bwd)));
    REQUIRE(out.size() == 1);
    auto zero = g.input(Tensor({H}));
    auto f = lstm_step(g, x, {zero, zero}, bind(g, std::as_const(p.fwd)));
    auto b = lstm_step(g, x, {zero, zero}, bind(g, std::as_const(p.bwd)));
    std::vector<double> expect = g.value(f.h).values();
    expect.insert(expect.end(), g.value(b.h).values().begin(), g.value(b.h).values().end());
    CHECK(g.value(out[0]).values() == expect);
  }
  SUBCASE("reversal swaps halves when directions share weights") {
    // With identical forward/backward weights, reversing the input mirrors the
    // two directions: output_rev[t] = swap_halves(output[n-1-t]).
    auto shared = p;
    shared.bwd = shared.fwd;
    Graph g(false);
    std::vector<Graph::Var> seq, rev;
    for (int t = 0; t < 3; ++t) seq.push_back(g.input(random_tensor({I}, rng)));
    rev.assign(seq.rbegin(), seq.rend());
    auto fv = bind(g, std::as_const(shared.fwd));
    auto bv = bind(g, std::as_const(shared.bwd));
    auto out = bilstm_encode(g, seq, fv, bv);
    auto out_rev = bilstm_encode(g, rev, fv, bv);
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(g.value(out_rev[t]).values() == swap_halves(g.value(out[2 - t])));
    }
  }
  SUBCASE("default hidden size gives 400-dim states") {
    Rng r(1);
    auto big = BiLstmParams::create("big", 8, 200, r);
    Graph g(false);
    Graph::Var seq[] = {g.input(Tensor({8}, 0.1)), g.input(Tensor({8}, -0.1))};
    auto out = bilstm_encode(g, seq, bind(g, std::as_const(big.fwd)), bind(g, std::as_const(big.bwd)));
    CHECK(g.value(out[0]).size() == 400);
    CHECK(big.output_dim() == 400);
  }
  SUBCASE("empty sequence") {
    Graph g(false);
    CHECK_THROWS_AS(bilstm_encode(g, {}, bind(g, std::as_const(p.fwd)), bind(g, std::as_const(p.bwd))), ShapeError);
  }
}

TEST_CASE("bilstm gradient") {
  Rng rng(9);
  auto p = BiLstmParams::create("bi", 3, 3, rng);
  std::vector<Parameter> xs;
  for (int t = 0; t < 4; ++t) xs.push_back(random_param("x" + std::to_string(t), {3}, rng));
  auto w = random_tensor({6}, rng);
  std::vector<Parameter*> ps = {&p.fwd.W, &p.fwd.b, &p.bwd.W, &p.bwd.b};
  for (auto& x : xs) ps.push_back(&x);
  auto rep = gradcheck(
      [&](bool grad) {
        Graph g(grad);
        std::vector<Graph::Var> seq;
        for (auto& x : xs) seq.push_back(g.param(x));
        auto out = bilstm_encode(g, seq, bind(g, p.fwd), bind(g, p.bwd));
        std::vector<Graph::Var> terms;
        for (auto o : out) terms.push_back(g.dot_const(o, w));
        auto loss = g.mean(terms);
        if (grad) g.backward(loss);
        return g.value(loss)[0];
      },
      ps, 1e-5);
  CHECK(rep.max_relative_error < 1e-4);
}

TEST_CASE("bilinear_attention") {
  Rng rng(4);
  Parameter M = random_param("M", {3, 4}, rng);
  SUBCASE("single key") {
    Graph g(false);
    auto key = g.input(random_tensor({4}, rng));
    Graph::Var keys[] = {key};
    auto a = g.bilinear_attention(g.input(random_tensor({3}, rng)), keys, g.frozen(M));
    CHECK(a.weights.values() == std::vector<double>{1.0});
    CHECK(g.value(a.context) == g.value(key));
  }
  SUBCASE("identical keys") {
    Graph g(false);
    auto k = random_tensor({4}, rng);
    std::vector<Graph::Var> keys(5, g.input(k));
    auto a = g.bilinear_attention(g.input(random_tensor({3}, rng)), keys, g.frozen(M));
    for (double w : a.weights.values()) CHECK(w == doctest::Approx(0.2).epsilon(1e-14));
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(g.value(a.context)[i] - k[i]) < 1e-12);
  }
  SUBCASE("permutation") {
    Graph g(false);
    std::vector<Graph::Var> keys;
    for (int i = 0; i < 4; ++i) keys.push_back(g.input(random_tensor({4}, rng)));
    auto q = g.input(random_tensor({3}, rng));
    auto a = g.bilinear_attention(q, keys, g.frozen(M));
    std::vector<std::size_t> perm = {2, 0, 3, 1};
    std::vector<Graph::Var> pk;
    for (auto i : perm) pk.push_back(keys[i]);
    auto b = g.bilinear_attention(q, pk, g.frozen(M));
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(b.weights[i] - a.weights[perm[i]]) < 1e-12);
      CHECK(std::abs(g.value(b.context)[i] - g.value(a.context)[i]) < 1e-12);
    }
  }
  SUBCASE("empty keys") {
    Graph g(false);
    CHECK_THROWS_AS(g.bilinear_attention(g.input(Tensor({3})), {}, g.frozen(M)), ShapeError);
  }
  SUBCASE("gradient") {
    auto q = random_param("q", {3}, rng);
    std::vector<Parameter> ks;
    for (int i = 0; i < 4; ++i) ks.push_back(random_param("k" + std::to_string(i), {4}, rng));
    auto w = random_tensor({4}, rng);
    std::vector<Parameter*> ps = {&M, &q};
    for (auto& k : ks) ps.push_back(&k);
    auto rep = gradcheck(
        [&](bool grad) {
          Graph g(grad);
          std::vector<Graph::Var> keys;
          for (auto& k : ks) keys.push_back(g.param(k));
          auto a = g.bilinear_attention(g.param(q), keys, g.param(M));
          auto loss = g.dot_const(a.context, w);
          if (grad) g.backward(loss);
          return g.value(loss)[0];
        },
        ps, 1e-5);
    CHECK(rep.max_relative_error < 1e-4);
  }
}

TEST_CASE("multilabel_bce_loss") {
  Graph g(false);
  auto l = g.bce_loss(g.input(Tensor({2})), Tensor::vector({1, 0}));
  CHECK(g.value(l)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  auto sat = g.bce_loss(g.input(Tensor::vector({40, -40, -40})), Tensor::vector({1, 0, 0}));
  CHECK(g.value(sat)[0] < 1e-12);
  CHECK(g.value(sat)[0] >= 0.0);

  CHECK_THROWS_AS(g.bce_loss(g.input(Tensor({3})), Tensor::vector({1, 0})), ShapeError);

  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    auto z = random_tensor({6}, rng, 5.0);
    std::vector<double> y(6);
    for (auto& v : y) v = (rng() & 1) ? 1.0 : 0.0;
    auto loss = g.bce_loss(g.input(z), Tensor::vector(y));
    CHECK(std::abs(g.value(loss)[0] - naive_bce(z.values(), y)) < 1e-10);
  }

  auto z = random_param("z", {5}, rng, 3.0);
  Parameter* ps[] = {&z};
  auto rep = gradcheck(
      [&](bool grad) {
        Graph gg(grad);
        auto loss = gg.bce_loss(gg.param(z), Tensor::vector({1, 0, 0, 1, 0}));
        if (grad) gg.backward(loss);
        return gg.value(loss)[0];
      },
      ps, 1e-5);
  CHECK(rep.max_relative_error < 1e-4);
}

TEST_CASE("tag_xent_loss") {
  Graph g(false);
  Graph::Var uniform[] = {g.input(Tensor({4}))};
  std::size_t gold0[] = {2};
  CHECK(g.value(g.xent_loss(uniform, gold0))[0] == doctest::Approx(std::log(4.0)).epsilon(1e-15));

  Graph::Var peaked[] = {g.input(Tensor::vector({50, 0, 0, 0}))};
  std::size_t gold1[] = {0};
  CHECK(g.value(g.xent_loss(peaked, gold1))[0] < 1e-20);

  // Hand computation: step losses are log(sum exp z) - z_gold.
  Graph::Var steps[] = {g.input(Tensor::vector({1, 2, 0})), g.input(Tensor::vector({0, 0, 3})),
                        g.input(Tensor::vector({-1, 1, 1}))};
  std::size_t gold[] = {1, 0, 2};
  const double expect = ((std::log(std::exp(1.0) + std::exp(2.0) + 1.0) - 2.0) + (std::log(2.0 + std::exp(3.0)) - 0.0) +
                         (std::log(std::exp(-1.0) + 2.0 * std::exp(1.0)) - 1.0)) /
                        3.0;
  CHECK(g.value(g.xent_loss(steps, gold))[0] == doctest::Approx(expect).epsilon(1e-14));

  std::size_t bad[] = {4};
  CHECK_THROWS_AS(g.xent_loss(uniform, bad), std::out_of_range);
}

TEST_CASE("clip_global_norm") {
  Parameter a("a", Tensor({2})), b("b", Tensor({1}));
  a.grad = Tensor::vector({1.5, 0});
  b.grad = Tensor::vector({2.0});
  Parameter* ps[] = {&a, &b};
  CHECK(clip_global_norm(ps, 5.0) == doctest::Approx(2.5));
  CHECK(a.grad.values() == std::vector<double>{1.5, 0});

  a.grad = Tensor::vector({6, 0});
  b.grad = Tensor::vector({8});
  CHECK(clip_global_norm(ps, 5.0) == doctest::Approx(10.0));
  CHECK(std::abs(std::sqrt(a.grad.squared_norm() + b.grad.squared_norm()) - 5.0) < 1e-9);
  CHECK(a.grad[0] == doctest::Approx(3.0));

  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Parameter> many;
    for (int k = 0; k < 4; ++k) {
      Parameter p("p", Tensor({3}));
      p.grad = random_tensor({3}, rng, 6.0);
      many.push_back(p);
    }
    std::vector<Parameter*> ptrs;
    std::vector<double> before;
    for (auto& p : many) {
      ptrs.push_back(&p);
      for (double v : p.grad.values()) before.push_back(std::abs(v));
    }
    clip_global_norm(ptrs, 5.0);
    double sq = 0;
    std::size_t i = 0;
    for (auto& p : many) {
      sq += p.grad.squared_norm();
      for (double v : p.grad.values()) CHECK(std::abs(v) <= before[i++] + 1e-15);
    }
    CHECK(std::sqrt(sq) <= 5.0 + 1e-9);
  }
  CHECK_THROWS_AS(clip_global_norm(ps, 0.0), ParameterError);
}

TEST_CASE("adam_step") {
  Parameter p("p", Tensor::vector({0.5, -2.0}));
  AdamState st;
  Parameter* ps[] = {&p};
  adam_step(ps, st);
  CHECK(p.value.values() == std::vector<double>{0.5, -2.0});
  CHECK(st.step_count == 1);

  // First step with bias correction: m_hat = g, v_hat = g^2, so the move is lr * g / (|g| + eps).
  Parameter s("s", Tensor::vector({1.0}));
  AdamState st2;
  Parameter* ss[] = {&s};
  s.grad = Tensor::vector({1.0});
  adam_step(ss, st2);
  CHECK(s.value[0] == doctest::Approx(1.0 - 0.001 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(s.grad[0] == 0.0);

  Parameter a("a", Tensor::vector({0.3, 0.1})), b("b", Tensor::vector({0.3, 0.1}));
  AdamState sa, sb;
  Parameter* pa[] = {&a};
  Parameter* pb[] = {&b};
  for (int k = 0; k < 5; ++k) {
    a.grad = Tensor::vector({0.7, -0.2 * k});
    b.grad = a.grad;
    adam_step(pa, sa);
    adam_step(pb, sb);
  }
  CHECK(a.value == b.value);
}

TEST_CASE("gradcheck sanity") {
  Rng rng(31);
  auto W = random_param("W", {3, 2}, rng);
  auto b = random_param("b", {3}, rng);
  auto x = random_tensor({2}, rng);
  auto w = random_tensor({3}, rng);
  Parameter* ps[] = {&W, &b};
  auto linear = [&](bool grad) {
    Graph g(grad);
    auto y = g.dot_const(g.affine(g.input(x), g.param(W), g.param(b)), w);
    if (grad) g.backward(y);
    return g.value(y)[0];
  };
  CHECK(gradcheck(linear, ps, 1e-5).max_relative_error < 1e-9);

  auto corrupted = [&](bool grad) {
    const double v = linear(grad);
    if (grad) {
      for (auto& gv : W.grad.values()) gv = -gv;
    }
    return v;
  };
  CHECK(gradcheck(corrupted, ps, 1e-5).max_relative_error > 0.1);

  auto nonfinite = [&](bool) { return std::nan(""); };
  CHECK_FALSE(gradcheck(nonfinite, ps, 1e-5).finite);
  CHECK_THROWS_AS(gradcheck(linear, ps, 1e-2), ParameterError);
}

TEST_CASE("dropout_mask") {
  Rng rng(1);
  auto ones = dropout_mask({10}, 0.0, rng);
  for (double v : ones.values()) CHECK(v == 1.0);

  auto m = dropout_mask({100000}, 0.5, rng);
  double kept = 0;
  for (double v : m.values()) {
    CHECK((v == 0.0 || v == 2.0));
    kept += v != 0.0;
  }
  CHECK(std::abs(kept / 100000.0 - 0.5) < 0.01);

  Rng r1(99), r2(99);
  CHECK(dropout_mask({50}, 0.3, r1) == dropout_mask({50}, 0.3, r2));
  CHECK_THROWS_AS(dropout_mask({5}, 1.0, rng), ParameterError);
}

TEST_CASE("archive round trip is bit exact") {
  Rng rng(77);
  Archive a;
  a.texts["manifest"] = "hidden=3\nlr=0.001\n";
  a.tensors.emplace_back("w", random_tensor({3, 2}, rng, 1e3));
  a.tensors.emplace_back("b", Tensor::vector({1e-300, -0.0, 3.141592653589793}));
  auto path = std::filesystem::temp_directory_path() / "hceds_archive_test.ckpt";
  write_archive(path, a);
  auto back = read_archive(path);
  CHECK(back.text("manifest") == a.texts["manifest"]);
  CHECK(back.tensor("w") == a.tensor("w"));
  CHECK(std::signbit(back.tensor("b")[1]));
  CHECK_THROWS_AS(back.tensor("missing"), FormatError);
  std::filesystem::remove(path);
}
