// End-to-end acceptance run: one PASS/FAIL line per criterion on stdout,
// progress and measurements on stderr. Exit status is non-zero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "hceds/corpus.hpp"
#include "hceds/embeddings.hpp"
#include "hceds/hcenlu.hpp"
#include "hceds/optim.hpp"
#include "hceds/service.hpp"

using namespace hceds;
using namespace hceds::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(const std::string& s) { std::fprintf(stderr, "  %s\n", s.c_str()); }

Verdict guarded(const std::function<Verdict()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

// ---------------------------------------------------------------------------
// 1. gradients

struct OpCase {
  std::string name;
  bool linear;
  std::vector<std::vector<std::size_t>> shapes;
  std::function<Graph::Var(Graph&, const std::vector<Graph::Var>&)> build;
};

GradcheckReport check_op(const OpCase& op, Rng& rng) {
  std::vector<Parameter> ps;
  for (std::size_t i = 0; i < op.shapes.size(); ++i) {
    ps.push_back(random_param(op.name + "." + std::to_string(i), op.shapes[i], rng));
  }
  std::vector<Parameter*> ptrs;
  for (auto& p : ps) ptrs.push_back(&p);
  Tensor weights;
  auto loss = [&](bool grad) {
    Graph g(grad);
    std::vector<Graph::Var> vs;
    for (auto& p : ps) vs.push_back(g.param(p));
    const Graph::Var out = op.build(g, vs);
    if (weights.size() != g.value(out).size()) weights = random_tensor({g.value(out).size()}, rng);
    const Graph::Var s = g.dot_const(out, weights);
    if (grad) g.backward(s);
    return g.value(s)[0];
  };
  loss(false);
  // Central differences are exact on affine and bilinear maps, so a larger
  // step only reduces rounding there.
  return gradcheck(loss, ptrs, op.linear ? 1e-4 : 1e-6);
}

Verdict criterion_gradients() {
  const auto t0 = Clock::now();
  Rng rng(101);
  const Tensor mask = random_tensor({5}, rng);
  const std::vector<OpCase> ops = {
      {"affine", true, {{3}, {4, 3}, {4}}, [](Graph& g, auto& v) { return g.affine(v[0], v[1], v[2]); }},
      {"add", true, {{5}, {5}}, [](Graph& g, auto& v) { return g.add(v[0], v[1]); }},
      {"mul_const", true, {{5}}, [&](Graph& g, auto& v) { return g.mul_const(v[0], mask); }},
      {"concat", true, {{2}, {3}, {4}}, [](Graph& g, auto& v) { return g.concat(v); }},
      {"slice", true, {{7}}, [](Graph& g, auto& v) { return g.slice(v[0], 2, 3); }},
      {"dot_const", true, {{5}}, [&](Graph& g, auto& v) { return g.dot_const(v[0], mask); }},
      {"mean", true, {{1}, {1}, {1}}, [](Graph& g, auto& v) { return g.mean(v); }},
      {"scale", true, {{5}}, [](Graph& g, auto& v) { return g.scale(v[0], -0.37); }},
      {"mul", false, {{5}, {5}}, [](Graph& g, auto& v) { return g.mul(v[0], v[1]); }},
      {"tanh", false, {{5}}, [](Graph& g, auto& v) { return g.tanh(v[0]); }},
      {"sigmoid", false, {{5}}, [](Graph& g, auto& v) { return g.sigmoid(v[0]); }},
      {"softmax", false, {{5}}, [](Graph& g, auto& v) { return g.softmax(v[0]); }},
      {"lstm_cell", false, {{3}, {2}, {2}, {8, 5}, {8}},
       [](Graph& g, auto& v) { return g.lstm_cell(v[0], v[1], v[2], v[3], v[4]); }},
      {"bilinear_attention", false, {{3}, {3, 2}, {2}, {2}, {2}, {2}},
       [](Graph& g, auto& v) {
         const std::vector<Graph::Var> keys(v.begin() + 2, v.end());
         return g.bilinear_attention(v[0], keys, v[1]).context;
       }},
      {"bce_loss", false, {{4}},
       [](Graph& g, auto& v) { return g.bce_loss(v[0], Tensor::vector({1, 0, 0, 1})); }},
      {"xent_loss", false, {{4}, {4}, {4}},
       [](Graph& g, auto& v) {
         const std::vector<std::size_t> gold = {2, 0, 3};
         return g.xent_loss(v, gold);
       }},
  };

  bool ok = true;
  double worst_linear = 0, worst_other = 0;
  for (const auto& op : ops) {
    const GradcheckReport r = check_op(op, rng);
    const double tol = op.linear ? 1e-8 : 1e-4;
    const bool pass = r.finite && r.coordinates > 0 && r.max_relative_error < tol;
    note(fmt("%-20s rel err %.3e (tol %.0e) %s", op.name.c_str(), r.max_relative_error, tol, pass ? "ok" : "FAIL"));
    ok = ok && pass;
    (op.linear ? worst_linear : worst_other) = std::max(op.linear ? worst_linear : worst_other, r.max_relative_error);
  }

  // character CNN through its embedding helper
  {
    CharCnnParams p = CharCnnParams::create("cnn", 3, 4, rng);
    Parameter* ps[] = {&p.table, &p.W, &p.b};
    const Tensor w = random_tensor({4}, rng);
    const GradcheckReport r = gradcheck(
        [&](bool grad) {
          Graph g(grad);
          auto s = g.dot_const(char_cnn_embed(g, "hotel", bind(g, p)), w);
          if (grad) g.backward(s);
          return g.value(s)[0];
        },
        ps, 1e-6);
    const bool pass = r.finite && r.max_relative_error < 1e-4;
    note(fmt("%-20s rel err %.3e (tol 1e-04) %s", "char_conv_maxpool", r.max_relative_error, pass ? "ok" : "FAIL"));
    ok = ok && pass;
    worst_other = std::max(worst_other, r.max_relative_error);
  }

  // full encoder loss at tiny dimensions: 2 intent labels, 2 span labels (6 tags)
  HcenluConfig cfg;
  cfg.d_ctx = 6;
  cfg.char_dim = 3;
  cfg.filters = 4;
  cfg.hidden = 3;
  cfg.sentence_hidden = 3;
  cfg.window = 2;
  const std::string utterance = "i want free parking .";
  const std::string context = "what is the address ?";
  std::vector<std::string> sentences;
  for (int k = 0; k < 3; ++k) sentences.insert(sentences.end(), {utterance, context});
  HcenluModel m = HcenluModel::create(cfg, BpeCodec::train(sentences, 200), {"Hotel-Inform", "Hotel-Request"},
                                      {"Hotel-Inform+Parking", "Hotel-Request+Addr"});
  TrainingExample ex;
  ex.utterance = utterance;
  ex.context = {{"system", context}};
  ex.labels = {"Hotel-Inform"};
  ex.spans = {{"Hotel-Inform+Parking", 3, 3}};
  const PreparedExample p = m.prepare(ex);
  const std::size_t uu_len = p.uu_seq.contextual.size(), dc_len = p.dc_seq.contextual.size();
  const auto params = m.parameters();
  const GradcheckReport r =
      gradcheck([&](bool grad) { return m.compute_loss({&p}, grad, std::nullopt); }, params, 1e-5);
  const bool small = uu_len <= 6 && dc_len <= 6 && m.labels().size() == 2;
  const bool full_ok = r.finite && r.max_relative_error < 1e-4 && small;
  note(fmt("%-20s rel err %.3e over %zu coordinates, %zu tags, sequences %zu/%zu, worst %s[%zu] %s", "encoder loss",
           r.max_relative_error, r.coordinates, m.tags().size(), uu_len, dc_len, r.worst_parameter.c_str(),
           r.worst_index, full_ok ? "ok" : "FAIL"));
  ok = ok && full_ok;

  const double secs = seconds_since(t0);
  ok = ok && secs < 120;
  return {ok, fmt("linear ops max %.2e (< 1e-8), other ops max %.2e, encoder %.2e (< 1e-4), %.1fs (< 120s)",
                  worst_linear, worst_other, r.max_relative_error, secs)};
}

// ---------------------------------------------------------------------------
// 2. attention

Verdict criterion_attention() {
  Rng rng(202);
  std::uniform_int_distribution<std::size_t> dim(1, 6), count(1, 10);
  double worst_sum = 0, worst_perm = 0, worst_single = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t qd = dim(rng), kd = dim(rng), n = count(rng);
    const Tensor q = random_tensor({qd}, rng, 3.0);
    const Tensor M = random_tensor({qd, kd}, rng, 3.0);
    std::vector<Tensor> keys;
    for (std::size_t i = 0; i < n; ++i) keys.push_back(random_tensor({kd}, rng, 3.0));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    Graph g(false);
    const auto qv = g.input(q), Mv = g.input(M);
    std::vector<Graph::Var> kv, pv;
    for (const auto& k : keys) kv.push_back(g.input(k));
    for (std::size_t i : perm) pv.push_back(kv[i]);
    const auto a = g.bilinear_attention(qv, kv, Mv);
    const auto b = g.bilinear_attention(qv, pv, Mv);
    const auto& w = a.weights.values();
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
    for (std::size_t j = 0; j < kd; ++j) {
      worst_perm = std::max(worst_perm, std::abs(g.value(a.context)[j] - g.value(b.context)[j]));
    }
    for (std::size_t i = 0; i < n; ++i) worst_perm = std::max(worst_perm, std::abs(b.weights[i] - a.weights[perm[i]]));

    const auto single = g.bilinear_attention(qv, std::span<const Graph::Var>(kv.data(), 1), Mv);
    worst_single = std::max(worst_single, std::abs(single.weights[0] - 1.0));
    for (std::size_t j = 0; j < kd; ++j) {
      worst_single = std::max(worst_single, std::abs(g.value(single.context)[j] - keys[0][j]));
    }
  }
  const bool ok = worst_sum <= 1e-12 && worst_perm <= 1e-12 && worst_single <= 1e-12;
  return {ok, fmt("1000 trials: |sum w - 1| max %.1e, permutation drift max %.1e, single-key error %.1e (all <= 1e-12)",
                  worst_sum, worst_perm, worst_single)};
}

// ---------------------------------------------------------------------------
// 3. BIOX round trip

std::string random_word(Rng& rng, std::size_t min_len, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<int> ch('a', 'z');
  std::string w;
  for (std::size_t n = len(rng); n > 0; --n) w.push_back(static_cast<char>(ch(rng)));
  return w;
}

Verdict criterion_biox() {
  Rng rng(303);
  std::vector<std::string> corpus;
  for (int i = 0; i < 800; ++i) {
    std::string line;
    for (int k = 0; k < 8; ++k) line += random_word(rng, 2, 10) + " ";
    corpus.push_back(line);
  }
  const BpeCodec codec = BpeCodec::train(corpus, 4000);
  const std::vector<std::string> labels = {"Hotel-Inform+Area", "Attraction-Inform+Type", "Hotel-Request+Addr",
                                           "Hotel-Inform+Parking"};
  std::size_t mismatches = 0, repairs = 0, multi_piece = 0, total_spans = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    std::string text;
    for (std::size_t k = 0; k < n; ++k) {
      text += ((rng() % 2) ? split_words(corpus[rng() % corpus.size()])[rng() % 8] : random_word(rng, 1, 12)) + " ";
    }
    const TokenizedUtterance tok = tokenize(text, codec);
    std::vector<SlotSpan> spans;
    for (std::size_t w = 0; w < n;) {
      if (rng() % 3 == 0) {
        const std::size_t last = std::min(n - 1, w + rng() % 3);
        spans.push_back({labels[rng() % labels.size()], w, last});
        w = last + 2;
      } else {
        ++w;
      }
    }
    const BioxDecodeResult decoded = biox_decode(tok, biox_align(tok, spans));
    repairs += decoded.repairs;
    total_spans += spans.size();
    bool same = decoded.spans.size() == spans.size();
    for (std::size_t k = 0; same && k < spans.size(); ++k) {
      same = decoded.spans[k].span() == spans[k] &&
             decoded.spans[k].value == join_words(tok.words, spans[k].first_word, spans[k].last_word);
    }
    mismatches += !same;
    multi_piece += tok.subwords.size() > tok.words.size();
  }

  // repairs on malformed sequences
  const TokenizedUtterance abc = tokenize("a b c", BpeCodec::train({"a b c", "a b c"}, 50));
  const auto i_start = biox_decode(abc, BioxSequence{{"I-L", "O", "O"}});
  const auto switched = biox_decode(abc, BioxSequence{{"B-L", "I-M", "I-M"}});
  const auto x_initial = biox_decode(abc, BioxSequence{{"X", "B-L", "O"}});
  const bool repaired = i_start.repairs == 1 && i_start.spans.size() == 1 && i_start.spans[0].span() == SlotSpan{"L", 0, 0} &&
                        switched.repairs == 1 && switched.spans.size() == 2 &&
                        switched.spans[1].span() == SlotSpan{"M", 1, 2} && x_initial.repairs == 1 &&
                        x_initial.spans.size() == 1;

  const bool ok = codec.merges().size() == 4000 && mismatches == 0 && repairs == 0 && multi_piece > 100 && repaired;
  return {ok, fmt("1000 utterances, %zu spans, %zu multi-piece, %zu merges: %zu mismatches, %zu repairs; "
                  "malformed-sequence repairs %s",
                  total_spans, multi_piece, codec.merges().size(), mismatches, repairs, repaired ? "correct" : "WRONG")};
}

// ---------------------------------------------------------------------------
// 5. policy

bool has_act(const SystemAction& a, const std::string& label, const std::string& slot, const std::string& value) {
  return std::any_of(a.acts.begin(), a.acts.end(),
                     [&](const DialogAct& x) { return x.label() == label && x.slot == slot && x.value == value; });
}

Verdict criterion_policy() {
  const World& w = world();
  Policy policy(w.schema, w.db, w.rules);
  std::vector<std::string> problems;

  Rng rng(1);
  DialogState s = update(init_state(w.schema), {{"Attraction", "Inform", "Type", "college"}}, "", w.schema);
  const SystemAction college = policy.decide(s, rng);
  if (!has_act(college, "Attraction-Recommend", "Name", "christ's college")) problems.push_back("college recommendation");

  Rng rng2(11);
  s = init_state(w.schema);
  std::vector<SystemAction> actions;
  const auto turns = case_study();
  for (std::size_t i = 0; i < turns.size(); ++i) {
    s = update(s, turns[i].user, "", w.schema);
    SystemAction a = policy.decide(s, rng2);
    if (shape_of(a.acts) != turns[i].expected) problems.push_back("shape of turn " + std::to_string(i + 1));
    s = record_system_turn(s, a, "", w.schema);
    actions.push_back(a);
  }
  const std::vector<std::tuple<std::size_t, std::string, std::string, std::string>> values = {
      {0, "Attraction-Inform", "Choice", "23"},          {0, "Attraction-Recommend", "Name", "broughton house gallery"},
      {1, "Attraction-Inform", "Addr", "98 king street"}, {1, "Attraction-Inform", "Fee", "free"},
      {2, "Hotel-Inform", "Choice", "18"},                {2, "Hotel-Recommend", "Name", "a and b guest house"},
      {3, "Hotel-Inform", "Addr", "124 tenison road"},    {3, "Hotel-Inform", "Post", "cb12dp"},
      {4, "Hotel-Inform", "Addr", "124 tenison road"},
  };
  for (const auto& [turn, label, slot, value] : values) {
    if (!has_act(actions[turn], label, slot, value)) problems.push_back(label + "." + slot + " != " + value);
  }
  if (!actions.back().close_session || !actions.back().acts.empty() || !s.closed) problems.push_back("closing turn");

  std::string detail = fmt("college case and %zu case-study turns", turns.size());
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

// ---------------------------------------------------------------------------
// 7. return on a synthetic population

Verdict criterion_return() {
  std::vector<DialogueLog> logs(1000);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    logs[i].success = i < 888;
    logs[i].turns.resize(7);
  }
  const MetricsReport r = compute_metrics(logs, world().schema, Averaging::micro, 40);
  const bool ok = std::abs(r.average_return - 59.56) < 1e-9 && std::abs(r.average_return - 61.56) <= 5.0;
  return {ok, fmt("888/1000 successes at 7 turns, L=40: average return %.4f (reference 61.56 +/- 5)", r.average_return)};
}

// ---------------------------------------------------------------------------
// 8. metrics against brute force

bool same_prf(const Prf& a, const Prf& b) {
  return a.precision == b.precision && a.recall == b.recall && a.f1 == b.f1 && a.true_positives == b.true_positives &&
         a.predicted == b.predicted && a.gold == b.gold;
}

bool same_nlu(const NluScores& a, const NluScores& b) {
  return same_prf(a.intent, b.intent) && same_prf(a.tag, b.tag) && same_prf(a.overall, b.overall);
}

Verdict criterion_metric_fixtures() {
  const Schema& schema = world().schema;
  const auto logs = metric_fixtures();
  std::size_t checked = 0, differ = 0;
  for (std::size_t n = 1; n <= logs.size(); ++n) {
    const std::vector<DialogueLog> sub(logs.begin(), logs.begin() + static_cast<std::ptrdiff_t>(n));
    const MetricsReport a = compute_metrics(sub, schema);
    const MetricsReport b = brute_force_metrics(sub, schema);
    ++checked;
    differ += !(a.success_rate == b.success_rate && a.termination_rate == b.termination_rate &&
                a.average_turns == b.average_turns && a.average_return == b.average_return &&
                a.precision == b.precision && a.recall == b.recall && a.f1 == b.f1 && a.book_rate == b.book_rate &&
                a.book_rate_vacuous == b.book_rate_vacuous);
  }
  const NluFixture f = nlu_fixtures();
  const bool nlu_same = same_nlu(score_nlu(f.gold, f.predicted), brute_force_nlu(f));
  return {differ == 0 && nlu_same,
          fmt("dialogue metrics on %zu fixture prefixes: %zu differ; NLU scores on %zu fixtures %s", checked, differ,
              f.gold.size(), nlu_same ? "identical" : "DIFFER")};
}

// ---------------------------------------------------------------------------
// 9. NLG

Verdict criterion_nlg() {
  const World& w = world();
  Rng rng(909);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& t : w.templates.all()) {
    for (const auto& p : t.signature) pairs.push_back(p);
  }
  pairs.push_back({"Hotel-Inform", "Colour"});
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1), len(1, 4), word(0, 5);
  const std::vector<std::string> words = {"north", "12:30", "01223 336265", "a and b", "free", "x{y}"};
  std::size_t missing = 0, values = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    SystemAction a;
    for (std::size_t k = 0, n = len(rng); k < n; ++k) {
      const auto& [label, slot] = pairs[pick(rng)];
      auto [d, i] = split_label(label);
      a.acts.push_back({d, i, slot, words[word(rng)] + " v" + std::to_string(trial * 10 + k)});
    }
    const std::string text = generate(a, w.templates).text;
    for (const auto& act : a.acts) {
      if (act.value == "none" || act.value == "?") continue;
      ++values;
      missing += text.find(act.value) == std::string::npos;
    }
  }
  const SystemAction two_slot{{{"Attraction", "Inform", "Post", "cb21jf"}, {"Attraction", "Inform", "Phone", "01223336265"}},
                              false};
  const Generation mined = generate(two_slot, w.templates);
  const Generation single = generate(two_slot, TemplateStore::defaults(w.schema));
  const bool ok = missing == 0 && mined.fragments == 1 && single.fragments == 2;
  return {ok, fmt("1000 random actions, %zu values, %zu missing; two-slot action: %zu fragment(s) mined vs %zu default",
                  values, missing, mined.fragments, single.fragments)};
}

// ---------------------------------------------------------------------------
// Trained-model criteria share one corpus and model.

HcenluConfig toy_config() {
  HcenluConfig c;
  c.d_ctx = 32;
  c.char_dim = 8;
  c.filters = 16;
  c.hidden = 48;
  c.sentence_hidden = 48;
  c.window = 4;
  c.batch = 8;
  c.epochs = 10;
  c.bpe_merges = 500;
  c.seed = 1;
  return c;
}

struct ToyData {
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> validation;
  std::vector<TrainingExample> test;
};

ToyData toy_data(const DialogueSystem& oracle) {
  const ToyCorpus corpus = generate_toy_corpus(oracle, ToyCorpusConfig{});
  ToyData d;
  d.train = examples_from_corpus(corpus.train);
  d.test = examples_from_corpus(corpus.test);
  // last 10% of the training utterances select the epoch
  const auto cut = d.train.begin() + static_cast<std::ptrdiff_t>(d.train.size() * 9 / 10);
  d.validation.assign(cut, d.train.end());
  d.train.erase(cut, d.train.end());
  return d;
}

std::vector<TrainingExample> context_dependent(const std::vector<TrainingExample>& xs) {
  std::vector<TrainingExample> out;
  for (const auto& x : xs) {
    if (x.context_dependent) out.push_back(x);
  }
  return out;
}

std::string describe(const HcenluModel& m, const std::string& text, const std::vector<Turn>& history) {
  return to_string(m.parse(text, history));
}

Verdict criterion_toy_nlu(const ToyData& data, const HcenluModel& full, double full_secs, const HcenluModel& ablated) {
  const NluScores s = nlu_component_metrics(full, data.test);
  const auto slice = context_dependent(data.test);
  const NluScores with_ctx = nlu_component_metrics(full, slice);
  const NluScores without = nlu_component_metrics(ablated, slice);
  note(fmt("test: intent P %.4f R %.4f F1 %.4f | tag P %.4f R %.4f F1 %.4f | overall F1 %.4f", s.intent.precision,
           s.intent.recall, s.intent.f1, s.tag.precision, s.tag.recall, s.tag.f1, s.overall.f1));
  note(fmt("context-dependent slice (%zu): window 4 intent %.4f overall %.4f | window 0 intent %.4f overall %.4f",
           slice.size(), with_ctx.intent.f1, with_ctx.overall.f1, without.intent.f1, without.overall.f1));
  const std::vector<Turn> museum = {{"user", "i prefer something related to museum ."},
                                    {"system", "there are 23 museums . i recommend broughton house gallery ."}};
  note("'i want free parking .' -> " + describe(full, "i want free parking .", {}));
  note("'i prefer something related to museum .' -> " + describe(full, "i prefer something related to museum .", {}));
  note("'what is the address ?' after museum -> " + describe(full, "what is the address ?", museum));
  note("'thanks , bye !' -> " + describe(full, "thanks , bye !", museum));

  const bool ok = s.intent.f1 >= 0.95 && s.tag.f1 >= 0.90 && full_secs <= 300 && !slice.empty() &&
                  without.overall.f1 < with_ctx.overall.f1;
  return {ok, fmt("intent F1 %.4f (>= 0.95), tag F1 %.4f (>= 0.90), trained in %.0fs (<= 300s); "
                  "context-dependent overall F1 window 0 %.4f < window 4 %.4f",
                  s.intent.f1, s.tag.f1, full_secs, without.overall.f1, with_ctx.overall.f1)};
}

Verdict criterion_simulation(const World& w, const HcenluModel& model) {
  const auto t0 = Clock::now();
  DialogueSystem oracle(w.schema, w.db, w.rules, w.templates);
  const auto logs = run_episodes(oracle, 500, 7);
  const MetricsReport r = compute_metrics(logs, w.schema);
  const double oracle_secs = seconds_since(t0);
  note("oracle simulation: " + format_report(r));

  const auto t1 = Clock::now();
  DialogueSystem trained(w.schema, w.db, w.rules, w.templates, &model);
  EpisodeConfig cfg;
  cfg.oracle = false;
  cfg.goals.domains = {"attraction", "hotel"};
  cfg.goals.max_domains = 2;
  const auto nlu_logs = run_episodes(trained, 500, 7, cfg);
  const MetricsReport n = compute_metrics(nlu_logs, w.schema);
  const double nlu_secs = seconds_since(t1);
  note("trained-parser simulation (attraction, hotel): " + format_report(n));

  const bool ok = r.success_rate >= 0.95 && r.termination_rate == 1.0 && r.unanswered_requests == 0 &&
                  n.success_rate >= 0.80 && oracle_secs + nlu_secs < 180;
  return {ok, fmt("oracle 500 episodes: success %.3f (>= 0.95), termination %.3f, %zu unanswered; "
                  "trained parser 500 episodes: success %.3f (>= 0.80); %.1fs (< 180s)",
                  r.success_rate, r.termination_rate, r.unanswered_requests, n.success_rate, oracle_secs + nlu_secs)};
}

Verdict criterion_model_metrics(const HcenluModel& model, const ToyData& data, Verdict fixtures) {
  NluFixture f;
  for (const auto& ex : data.test) {
    f.gold.push_back(gold_outcome(ex));
    f.predicted.push_back(predicted_outcome(model.analyse(ex.utterance, ex.context)));
  }
  const bool same = same_nlu(nlu_component_metrics(model, data.test), brute_force_nlu(f));
  return {fixtures.pass && same,
          fixtures.detail + fmt("; trained-model scores on %zu test utterances %s", f.gold.size(),
                                same ? "identical" : "DIFFER")};
}

bool same_outputs(const NluOutput& a, const NluOutput& b) {
  return a.intent_probs == b.intent_probs && a.tag_distributions == b.tag_distributions && a.acts == b.acts &&
         a.tags.tags == b.tags.tags;
}

Verdict criterion_determinism(const World& w, const ToyData& data, const HcenluModel& model) {
  std::vector<std::string> problems;

  // training
  HcenluConfig cfg = toy_config();
  cfg.hidden = cfg.sentence_hidden = 16;
  cfg.epochs = 2;
  const std::vector<TrainingExample> subset(data.train.begin(), data.train.begin() + 300);
  const std::vector<TrainingExample> valid(data.validation.begin(), data.validation.begin() + 50);
  const HcenluModel a = train_hcenlu(subset, valid, cfg);
  const HcenluModel b = train_hcenlu(subset, valid, cfg);
  const auto pa = a.parameters(), pb = b.parameters();
  bool params_same = pa.size() == pb.size();
  for (std::size_t i = 0; params_same && i < pa.size(); ++i) params_same = pa[i]->value.values() == pb[i]->value.values();
  if (!params_same) problems.push_back("training differs");

  // simulation, with and without the parser
  DialogueSystem oracle(w.schema, w.db, w.rules, w.templates);
  DialogueSystem trained(w.schema, w.db, w.rules, w.templates, &model);
  EpisodeConfig nlu_cfg;
  nlu_cfg.oracle = false;
  nlu_cfg.goals.domains = {"attraction", "hotel"};
  nlu_cfg.goals.max_domains = 2;
  auto dump = [](const std::vector<DialogueLog>& logs) {
    std::string s;
    for (const auto& l : logs) s += log_to_json(l).dump() + "\n";
    return s;
  };
  if (dump(run_episodes(oracle, 100, 3)) != dump(run_episodes(oracle, 100, 3))) problems.push_back("oracle simulation");
  if (dump(run_episodes(trained, 50, 3, nlu_cfg)) != dump(run_episodes(trained, 50, 3, nlu_cfg))) {
    problems.push_back("trained simulation");
  }

  // service replay
  const std::vector<std::string> script = {"i prefer something related to museum .", "what is the address ?",
                                           "i need a hotel in the north .", "does it have free parking ?",
                                           "thanks , bye !"};
  auto replay = [&] {
    SessionManager sessions(trained, ServiceConfig{});
    const std::string id = sessions.open();
    std::string out;
    for (const auto& line : script) out += sessions.post(id, line).dump() + "\n";
    return out;
  };
  if (replay() != replay()) problems.push_back("service replay");

  // checkpoint
  const auto path = std::filesystem::temp_directory_path() / "hceds_acceptance_model.ckpt";
  model.save(path);
  const HcenluModel back = HcenluModel::load(path);
  std::filesystem::remove(path);
  std::size_t differ = 0;
  for (const auto& ex : data.test) {
    differ += !same_outputs(model.analyse(ex.utterance, ex.context), back.analyse(ex.utterance, ex.context));
  }
  if (differ) problems.push_back(std::to_string(differ) + " outputs changed after reload");

  std::string detail = fmt("two training runs, oracle and trained simulations, %zu-turn service replay, "
                           "checkpoint reload over %zu utterances",
                           script.size(), data.test.size());
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main() {
  const char* names[] = {"gradient correctness", "attention invariants", "BIOX round trip", "toy NLU quality",
                         "policy golden cases",  "end-to-end simulation", "return formula",  "metric equivalence",
                         "NLG faithfulness",     "determinism"};
  std::map<int, Verdict> results;
  auto run = [&](int id, const std::function<Verdict()>& f) {
    std::fprintf(stderr, "[%d] %s\n", id, names[id - 1]);
    const auto t0 = Clock::now();
    results[id] = guarded(f);
    std::fprintf(stderr, "  %s in %.1fs\n", results[id].pass ? "passed" : "FAILED", seconds_since(t0));
  };

  run(1, criterion_gradients);
  run(2, criterion_attention);
  run(3, criterion_biox);
  run(5, criterion_policy);
  run(7, criterion_return);
  run(9, criterion_nlg);
  const Verdict fixtures = guarded(criterion_metric_fixtures);

  const World& w = world();
  DialogueSystem oracle(w.schema, w.db, w.rules, w.templates);
  std::fprintf(stderr, "training toy models\n");
  ToyData data;
  HcenluModel full, ablated;
  double full_secs = 0;
  bool trained = false;
  std::string train_error;
  try {
    data = toy_data(oracle);
    note(fmt("corpus: %zu train, %zu validation, %zu test utterances", data.train.size(), data.validation.size(),
             data.test.size()));
    TrainReport report;
    full = train_hcenlu(data.train, data.validation, toy_config(), &report);
    full_secs = report.seconds;
    note(fmt("window 4 model: %.1fs, best epoch %zu", report.seconds, report.best_epoch));
    HcenluConfig ablation = toy_config();
    ablation.window = 0;
    TrainReport ablation_report;
    ablated = train_hcenlu(data.train, data.validation, ablation, &ablation_report);
    note(fmt("window 0 model: %.1fs, best epoch %zu", ablation_report.seconds, ablation_report.best_epoch));
    trained = true;
  } catch (const std::exception& e) {
    train_error = std::string("training failed: ") + e.what();
  }

  auto needs_model = [&](const std::function<Verdict()>& f) {
    return [&, f] { return trained ? f() : Verdict{false, train_error}; };
  };
  run(4, needs_model([&] { return criterion_toy_nlu(data, full, full_secs, ablated); }));
  run(6, needs_model([&] { return criterion_simulation(w, full); }));
  run(8, needs_model([&] { return criterion_model_metrics(full, data, fixtures); }));
  run(10, needs_model([&] { return criterion_determinism(w, data, full); }));

  int failed = 0;
  for (const auto& [id, v] : results) {
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", id, names[id - 1], v.detail.c_str());
    failed += !v.pass;
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
