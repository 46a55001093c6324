#include "hceds/hcenlu.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <set>
#include <sstream>

#include "hceds/checkpoint.hpp"
#include "hceds/optim.hpp"

namespace hceds {

namespace {

std::string join_lines(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += s + "\n";
  return out;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::pair<std::string, std::string> split_span_label(const std::string& label) {
  const auto plus = label.rfind('+');
  if (plus == std::string::npos) throw AnnotationError("span label '" + label + "' has no '+slot' part");
  return {label.substr(0, plus), label.substr(plus + 1)};
}

}  // namespace

std::string HcenluConfig::to_text() const {
  std::ostringstream o;
  o.precision(17);
  o << "d_ctx=" << d_ctx << "\nchar_dim=" << char_dim << "\nfilters=" << filters << "\nhidden=" << hidden
    << "\nsentence_hidden=" << sentence_hidden << "\nwindow=" << window << "\nthreshold=" << threshold
    << "\nuse_cnn=" << use_cnn << "\ntag_context=" << tag_context << "\nintent_attention=" << intent_attention
    << "\nlearning_rate=" << learning_rate << "\nclip=" << clip << "\ndropout=" << dropout << "\nepochs=" << epochs
    << "\nbatch=" << batch << "\nseed=" << seed << "\nbpe_merges=" << bpe_merges << "\n";
  return o.str();
}

HcenluConfig HcenluConfig::from_text(const std::string& text) {
  HcenluConfig c;
  for (const auto& line : split_lines(text)) {
    if (line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line without '=': " + line);
    const std::string k = line.substr(0, eq);
    const std::string v = line.substr(eq + 1);
    auto size = [&] { return static_cast<std::size_t>(std::stoull(v)); };
    auto flag = [&] { return v == "1" || v == "true"; };
    if (k == "d_ctx") c.d_ctx = size();
    else if (k == "char_dim") c.char_dim = size();
    else if (k == "filters") c.filters = size();
    else if (k == "hidden") c.hidden = size();
    else if (k == "sentence_hidden") c.sentence_hidden = size();
    else if (k == "window") c.window = size();
    else if (k == "threshold") c.threshold = std::stod(v);
    else if (k == "use_cnn") c.use_cnn = flag();
    else if (k == "tag_context") c.tag_context = flag();
    else if (k == "intent_attention") c.intent_attention = flag();
    else if (k == "learning_rate") c.learning_rate = std::stod(v);
    else if (k == "clip") c.clip = std::stod(v);
    else if (k == "dropout") c.dropout = std::stod(v);
    else if (k == "epochs") c.epochs = size();
    else if (k == "batch") c.batch = size();
    else if (k == "seed") c.seed = std::stoull(v);
    else if (k == "bpe_merges") c.bpe_merges = size();
    else throw FormatError("unknown config key '" + k + "'");
  }
  return c;
}

DialogContextWindow build_context(const std::vector<Turn>& history, std::size_t w) {
  DialogContextWindow win;
  win.w = w;
  const std::size_t n = std::min(w, history.size());
  win.turns.assign(history.end() - static_cast<std::ptrdiff_t>(n), history.end());
  return win;
}

std::string context_text(const DialogContextWindow& window) {
  if (window.turns.empty()) return "<pad>";
  std::string out;
  for (const auto& t : window.turns) {
    if (!out.empty()) out += ' ';
    out += t.speaker == "system" ? "<sys>" : "<usr>";
    const std::string text = normalize(t.text);
    if (!text.empty()) out += " " + text;
  }
  return out;
}

std::vector<std::size_t> predict_domain_intent(const std::vector<double>& probs, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] >= threshold) out.push_back(i);
  }
  if (out.empty() && !probs.empty()) {
    out.push_back(static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin()));
  }
  return out;
}

std::vector<DialogAct> decode_acts(const std::vector<std::string>& labels, const std::vector<DecodedSpan>& spans) {
  std::vector<DialogAct> acts;
  std::set<std::string> covered;
  auto push = [&](DialogAct a) {
    if (std::find(acts.begin(), acts.end(), a) == acts.end()) acts.push_back(std::move(a));
  };
  for (const auto& s : spans) {
    const auto [di, slot] = split_span_label(s.label);
    const auto [domain, intent] = split_label(di);
    push({domain, intent, slot, intent == "Request" ? "?" : s.value});
    covered.insert(di);
  }
  for (const auto& l : labels) {
    if (covered.count(l)) continue;
    const auto [domain, intent] = split_label(l);
    push({domain, intent, "none", "none"});
  }
  return acts;
}

std::vector<DialogAct> decode_acts(const std::vector<std::string>& labels, const BioxSequence& tags,
                                   const TokenizedUtterance& tok, std::size_t* repairs) {
  BioxDecodeResult r = biox_decode(tok, tags);
  if (repairs) *repairs = r.repairs;
  return decode_acts(labels, r.spans);
}

std::vector<std::string> tag_inventory(const std::vector<std::string>& span_labels) {
  std::vector<std::string> tags = {"O", "X"};
  for (const auto& l : span_labels) {
    tags.push_back("B-" + l);
    tags.push_back("I-" + l);
  }
  return tags;
}

HcenluModel HcenluModel::create(const HcenluConfig& config, BpeCodec codec, std::vector<std::string> labels,
                                std::vector<std::string> span_labels, ContextualEmbeddingProvider provider) {
  if (labels.empty()) throw ParameterError("HCENLU needs at least one domain-intent label");
  if (provider.size() == 0) provider = ContextualEmbeddingProvider(config.d_ctx);
  HcenluModel m;
  m.config_ = config;
  m.codec_ = std::move(codec);
  m.labels_ = std::move(labels);
  m.tags_ = tag_inventory(span_labels);
  for (std::size_t i = 0; i < m.tags_.size(); ++i) m.tag_index_[m.tags_[i]] = i;
  m.set_provider(std::move(provider));

  Rng rng(config.seed);
  const std::size_t in = config.d_ctx + (config.use_cnn ? config.filters : 0);
  const std::size_t H = config.hidden, S = config.sentence_hidden;
  m.cnn_ = CharCnnParams::create("cnn", config.char_dim, config.filters, rng);
  m.uu_ = BiLstmParams::create("uu", in, H, rng);
  m.dc_ = BiLstmParams::create("dc", in, H, rng);
  m.intent_ = BiLstmParams::create("intent", 2 * H, S, rng);
  m.tag_ = BiLstmParams::create("tag", 2 * H, S, rng);
  m.M_ = make_weight("attention.M", 2 * S, 2 * H, rng);
  const std::size_t concat = 2 * H + 2 * H + 2 * S;
  m.W_intent_ = make_weight("intent.head.W", m.labels_.size(), concat, rng);
  m.b_intent_ = make_bias("intent.head.b", m.labels_.size());
  m.W_tag_ = make_weight("tag.head.W", m.tags_.size(), concat, rng);
  m.b_tag_ = make_bias("tag.head.b", m.tags_.size());
  return m;
}

void HcenluModel::set_provider(ContextualEmbeddingProvider p) {
  if (p.dim() != config_.d_ctx) {
    throw ShapeError("embedding store has d_ctx " + std::to_string(p.dim()) + ", model expects " +
                     std::to_string(config_.d_ctx));
  }
  provider_ = std::move(p);
}

std::vector<Parameter*> HcenluModel::parameters() {
  std::vector<Parameter*> out = {&cnn_.table, &cnn_.W, &cnn_.b};
  for (BiLstmParams* b : {&uu_, &dc_, &intent_, &tag_}) {
    for (LstmParams* l : {&b->fwd, &b->bwd}) {
      out.push_back(&l->W);
      out.push_back(&l->b);
    }
  }
  for (Parameter* p : {&M_, &W_intent_, &b_intent_, &W_tag_, &b_tag_}) out.push_back(p);
  return out;
}

std::vector<const Parameter*> HcenluModel::parameters() const {
  auto ps = const_cast<HcenluModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

PreparedSequence HcenluModel::prepare_sequence(const TokenizedUtterance& tok, EmbedStats* stats) const {
  PreparedSequence s;
  s.contextual = provider_.embed(tok, stats);
  for (const auto& p : tok.pieces) s.surfaces.push_back(piece_surface(p));
  return s;
}

PreparedExample HcenluModel::prepare(const std::string& utterance, const std::vector<Turn>& history,
                                     EmbedStats* stats) const {
  PreparedExample ex;
  ex.uu = tokenize(utterance, codec_);
  if (ex.uu.pieces.empty()) throw std::invalid_argument("NLU needs a non-empty user utterance");
  ex.uu_seq = prepare_sequence(ex.uu, stats);
  const DialogContextWindow win = build_context(history, config_.window);
  if (win.turns.empty()) {
    ex.dc_seq.contextual.push_back(provider_.fallback("<pad>"));
    ex.dc_seq.surfaces.push_back("<pad>");
  }
  for (const auto& t : win.turns) {
    const std::string marker = t.speaker == "system" ? "<sys>" : "<usr>";
    ex.dc_seq.contextual.push_back(provider_.fallback(marker));
    ex.dc_seq.surfaces.push_back(marker);
    PreparedSequence turn = prepare_sequence(tokenize(t.text, codec_), stats);
    for (auto& v : turn.contextual) ex.dc_seq.contextual.push_back(std::move(v));
    for (auto& s : turn.surfaces) ex.dc_seq.surfaces.push_back(std::move(s));
  }
  return ex;
}

PreparedExample HcenluModel::prepare(const TrainingExample& e, EmbedStats* stats) const {
  PreparedExample ex = prepare(e.utterance, e.context, stats);
  ex.intent_targets = Tensor({labels_.size()});
  for (const auto& l : e.labels) {
    auto it = std::find(labels_.begin(), labels_.end(), l);
    if (it != labels_.end()) ex.intent_targets[static_cast<std::size_t>(it - labels_.begin())] = 1.0;
  }
  std::vector<SlotSpan> known;
  for (const auto& s : e.spans) {
    if (tag_index_.count("B-" + s.label)) known.push_back(s);
  }
  const BioxSequence tags = biox_align(ex.uu, known);
  for (const auto& t : tags.tags) ex.tag_ids.push_back(tag_index_.at(t));
  return ex;
}

HcenluModel::Forward HcenluModel::forward(Graph& g, const PreparedExample& ex, bool trainable, Rng* dropout_rng) {
  if (trainable) return run(g, ex, true, dropout_rng);
  return static_cast<const HcenluModel*>(this)->run(g, ex, false, dropout_rng);
}

HcenluModel::Forward HcenluModel::run(Graph& g, const PreparedExample& ex, bool trainable, Rng* dropout_rng) const {
  // trainable is only ever true when reached through the non-const forward()
  auto leaf = [&](const Parameter& p) { return trainable ? g.param(const_cast<Parameter&>(p)) : g.frozen(p); };
  auto lstm = [&](const LstmParams& p) { return trainable ? bind(g, const_cast<LstmParams&>(p)) : bind(g, p); };

  CharCnnVars cnn{};
  if (config_.use_cnn) cnn = trainable ? bind(g, const_cast<CharCnnParams&>(cnn_)) : bind(g, cnn_);
  auto embed = [&](const PreparedSequence& s) {
    std::vector<Graph::Var> out;
    out.reserve(s.contextual.size());
    for (std::size_t i = 0; i < s.contextual.size(); ++i) {
      Graph::Var c = g.input(s.contextual[i]);
      if (config_.use_cnn) {
        const Graph::Var parts[] = {c, char_cnn_embed(g, s.surfaces[i], cnn)};
        c = g.concat(parts);
      }
      out.push_back(c);
    }
    return out;
  };
  auto drop = [&](std::vector<Graph::Var> seq) {
    if (!dropout_rng || config_.dropout <= 0) return seq;
    for (auto& v : seq) v = g.mul_const(v, dropout_mask({g.value(v).size()}, config_.dropout, *dropout_rng));
    return seq;
  };

  const auto uu_emb = embed(ex.uu_seq);
  const auto dc_emb = embed(ex.dc_seq);
  const auto h_uu = drop(bilstm_encode(g, uu_emb, lstm(uu_.fwd), lstm(uu_.bwd)));
  const auto h_dc = drop(bilstm_encode(g, dc_emb, lstm(dc_.fwd), lstm(dc_.bwd)));
  const auto h_int = drop(bilstm_encode(g, h_uu, lstm(intent_.fwd), lstm(intent_.bwd)));
  const auto h_tag = drop(bilstm_encode(g, h_uu, lstm(tag_.fwd), lstm(tag_.bwd)));

  Forward f;
  const Graph::Var query = h_int.back();
  Graph::Attention att = g.bilinear_attention(query, h_dc, leaf(M_));
  f.context = att.context;
  f.attention = att.weights.values();
  const std::size_t kd = g.value(h_dc.back()).size();
  const Graph::Var zeros = g.input(Tensor({kd}));

  const Graph::Var intent_parts[] = {config_.intent_attention ? att.context : zeros, h_dc.back(), query};
  f.intent_logits = g.affine(g.concat(intent_parts), leaf(W_intent_), leaf(b_intent_));

  const Graph::Var Wt = leaf(W_tag_), bt = leaf(b_tag_);
  const Graph::Var tag_ctx = config_.tag_context ? att.context : zeros;
  const Graph::Var tag_last = config_.tag_context ? h_dc.back() : zeros;
  for (const auto& h : h_tag) {
    const Graph::Var parts[] = {tag_ctx, tag_last, h};
    f.tag_logits.push_back(g.affine(g.concat(parts), Wt, bt));
  }
  return f;
}

double HcenluModel::compute_loss(const std::vector<const PreparedExample*>& batch, bool backward,
                                 std::optional<std::uint64_t> dropout_seed) {
  if (batch.empty()) throw ParameterError("compute_loss needs a non-empty batch");
  std::optional<Rng> rng;
  if (dropout_seed) rng.emplace(*dropout_seed);
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const PreparedExample* ex : batch) {
    Graph g(backward);
    Forward f = forward(g, *ex, backward, rng ? &*rng : nullptr);
    const Graph::Var bce = g.bce_loss(f.intent_logits, ex->intent_targets);
    const Graph::Var xent = g.xent_loss(f.tag_logits, ex->tag_ids);
    const Graph::Var loss = g.scale(g.add(bce, xent), inv);
    if (backward) g.backward(loss);
    total += g.value(loss)[0];
  }
  return total;
}

NluOutput HcenluModel::analyse(const PreparedExample& ex) const {
  Graph g(false);
  Forward f = run(g, ex, false, nullptr);
  NluOutput out;
  const Tensor& z = g.value(f.intent_logits);
  std::vector<double> probs(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    probs[i] = sigmoid(z[i]);
    out.intent_probs[labels_[i]] = probs[i];
  }
  for (std::size_t i : predict_domain_intent(probs, config_.threshold)) out.labels.push_back(labels_[i]);
  for (const auto& v : f.tag_logits) {
    Tensor p = softmax(g.value(v).span());
    const auto best = static_cast<std::size_t>(std::max_element(p.values().begin(), p.values().end()) - p.values().begin());
    out.tags.tags.push_back(tags_[best]);
    out.tag_distributions.push_back(p.values());
  }
  BioxDecodeResult r = biox_decode(ex.uu, out.tags);
  out.spans = r.spans;
  out.repairs = r.repairs;
  out.acts = decode_acts(out.labels, out.spans);
  out.attention = f.attention;
  return out;
}

NluOutput HcenluModel::analyse(const std::string& utterance, const std::vector<Turn>& history) const {
  EmbedStats stats;
  PreparedExample ex = prepare(utterance, history, &stats);
  NluOutput out = analyse(ex);
  out.embed_stats = stats;
  return out;
}

std::vector<DialogAct> HcenluModel::parse(std::string_view utterance, const std::vector<Turn>& history) const {
  return analyse(std::string(utterance), history).acts;
}

void HcenluModel::save(const std::filesystem::path& path) const {
  Archive a;
  a.texts["manifest"] = config_.to_text();
  a.texts["codec"] = codec_.to_text();
  a.texts["labels"] = join_lines(labels_);
  a.texts["tags"] = join_lines(tags_);
  for (const Parameter* p : parameters()) a.tensors.emplace_back(p->name, p->value);
  write_archive(path, a);
}

HcenluModel HcenluModel::load(const std::filesystem::path& path) {
  Archive a = read_archive(path);
  const HcenluConfig config = HcenluConfig::from_text(a.text("manifest"));
  std::vector<std::string> span_labels;
  for (const auto& t : split_lines(a.text("tags"))) {
    if (t.rfind("B-", 0) == 0) span_labels.push_back(t.substr(2));
  }
  HcenluModel m = create(config, BpeCodec::from_text(a.text("codec")), split_lines(a.text("labels")), span_labels);
  if (m.tags_ != split_lines(a.text("tags"))) throw FormatError(path.string() + ": tag inventory is malformed");
  for (Parameter* p : m.parameters()) {
    const Tensor& t = a.tensor(p->name);
    if (!t.same_shape(p->value)) {
      throw FormatError(path.string() + ": tensor " + p->name + " has shape " + shape_string(t.shape()) + ", expected " +
                        shape_string(p->value.shape()));
    }
    p->value = t;
    p->zero_grad();
  }
  return m;
}

NluOutcome gold_outcome(const TrainingExample& ex) {
  const auto words = split_words(normalize(ex.utterance));
  std::vector<DecodedSpan> spans;
  for (const auto& s : ex.spans) {
    if (s.last_word >= words.size() || s.first_word > s.last_word) {
      throw AnnotationError("span '" + s.label + "' outside utterance '" + ex.utterance + "'");
    }
    spans.push_back({s.label, s.first_word, s.last_word, join_words(words, s.first_word, s.last_word)});
  }
  std::sort(spans.begin(), spans.end(), [](const DecodedSpan& a, const DecodedSpan& b) { return a.first_word < b.first_word; });
  NluOutcome o;
  o.labels = ex.labels;
  o.spans = ex.spans;
  o.acts = decode_acts(ex.labels, spans);
  return o;
}

NluOutcome predicted_outcome(const NluOutput& out) {
  NluOutcome o;
  o.labels = out.labels;
  for (const auto& s : out.spans) o.spans.push_back(s.span());
  o.acts = out.acts;
  return o;
}

NluScores nlu_component_metrics(const HcenluModel& model, const std::vector<TrainingExample>& test) {
  std::vector<NluOutcome> gold, pred;
  gold.reserve(test.size());
  pred.reserve(test.size());
  for (const auto& ex : test) {
    gold.push_back(gold_outcome(ex));
    pred.push_back(predicted_outcome(model.analyse(model.prepare(ex.utterance, ex.context))));
  }
  return score_nlu(gold, pred);
}

HcenluModel train_hcenlu(const std::vector<TrainingExample>& train, const std::vector<TrainingExample>& validation,
                         const HcenluConfig& config, TrainReport* report, ContextualEmbeddingProvider provider) {
  if (train.empty()) throw ParameterError("training set is empty");
  std::vector<std::string> sentences;
  std::set<std::string> seen;
  std::set<std::string> labels, span_labels;
  auto add_sentence = [&](const std::string& s) {
    if (seen.insert(s).second) sentences.push_back(normalize(s));
  };
  for (const auto& ex : train) {
    add_sentence(ex.utterance);
    for (const auto& t : ex.context) add_sentence(t.text);
    labels.insert(ex.labels.begin(), ex.labels.end());
    for (const auto& s : ex.spans) span_labels.insert(s.label);
  }
  BpeCodec codec = BpeCodec::train(sentences, config.bpe_merges);
  HcenluModel model = HcenluModel::create(config, std::move(codec), {labels.begin(), labels.end()},
                                          {span_labels.begin(), span_labels.end()}, std::move(provider));
  TrainReport r = fit(model, train, validation);
  if (report) *report = std::move(r);
  return model;
}

TrainReport fit(HcenluModel& model, const std::vector<TrainingExample>& train,
                const std::vector<TrainingExample>& validation) {
  if (train.empty()) throw ParameterError("training set is empty");
  const auto start = std::chrono::steady_clock::now();
  const HcenluConfig& cfg = model.config();
  std::vector<PreparedExample> prepared;
  prepared.reserve(train.size());
  for (const auto& ex : train) prepared.push_back(model.prepare(ex));
  std::vector<PreparedExample> valid_prepared;
  std::vector<NluOutcome> valid_gold;
  for (const auto& ex : validation) {
    valid_prepared.push_back(model.prepare(ex.utterance, ex.context));
    valid_gold.push_back(gold_outcome(ex));
  }

  auto params = model.parameters();
  for (Parameter* p : params) p->zero_grad();
  AdamState adam;
  adam.learning_rate = cfg.learning_rate;
  Rng rng(cfg.seed ^ 0x7472616996ULL);
  std::vector<std::size_t> order(prepared.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainReport report;
  double best = -1.0;
  std::vector<Tensor> best_values;
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start_i = 0; start_i < order.size(); start_i += batch) {
      std::vector<const PreparedExample*> b;
      for (std::size_t k = start_i; k < std::min(order.size(), start_i + batch); ++k) b.push_back(&prepared[order[k]]);
      loss += model.compute_loss(b, true, rng());
      ++batches;
      clip_global_norm(params, cfg.clip);
      adam_step(params, adam);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss / static_cast<double>(batches);
    if (!valid_prepared.empty()) {
      std::vector<NluOutcome> pred;
      for (const auto& ex : valid_prepared) pred.push_back(predicted_outcome(model.analyse(ex)));
      stats.validation = score_nlu(valid_gold, pred);
    }
    const double score = valid_prepared.empty() ? -stats.train_loss : stats.validation.overall.f1;
    if (score > best) {
      best = score;
      report.best_epoch = epoch;
      best_values.clear();
      for (Parameter* p : params) best_values.push_back(p->value);
    }
    report.history.push_back(std::move(stats));
  }
  for (std::size_t i = 0; i < params.size() && !best_values.empty(); ++i) params[i]->value = best_values[i];
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace hceds
