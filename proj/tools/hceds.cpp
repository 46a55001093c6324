// Command-line front end: training, evaluation, simulation, template mining,
// the HTTP service, a terminal chat and embedding ingestion.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "hceds/corpus.hpp"
#include "hceds/evaluation.hpp"
#include "hceds/hcenlu.hpp"
#include "hceds/service.hpp"
#include "httplib.h"

using namespace hceds;
using nlohmann::ordered_json;

namespace {

struct Common {
  std::string data_dir = default_data_dir().string();
  std::string templates;
  std::string embeddings;
};

void add_common(CLI::App* app, Common& c, bool model_inputs) {
  app->add_option("--data-dir", c.data_dir, "Directory with schema.json, db/, policy_rules.json")->check(CLI::ExistingDirectory);
  app->add_option("--templates", c.templates, "Extra template store to merge")->check(CLI::ExistingFile);
  if (model_inputs) {
    app->add_option("--embeddings", c.embeddings, "Contextual embedding store (hash fallback otherwise)")
        ->check(CLI::ExistingFile);
  }
}

HcenluModel load_model(const std::string& path, const Common& c) {
  HcenluModel m = HcenluModel::load(path);
  if (!c.embeddings.empty()) m.set_provider(ContextualEmbeddingProvider::load(c.embeddings));
  return m;
}

void write_json_lines(const std::string& path, const std::vector<ordered_json>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : rows) out << r.dump() << '\n';
}

// ---- train

struct TrainArgs {
  HcenluConfig cfg;
  std::string train, valid, out;
};

int run_train(const TrainArgs& a, const Common& c) {
  const auto train = examples_from_corpus(read_corpus(a.train));
  const auto valid = a.valid.empty() ? std::vector<TrainingExample>{} : examples_from_corpus(read_corpus(a.valid));
  std::fprintf(stderr, "training on %zu utterances, validating on %zu\n", train.size(), valid.size());
  ContextualEmbeddingProvider provider(0);
  if (!c.embeddings.empty()) provider = ContextualEmbeddingProvider::load(c.embeddings);
  TrainReport report;
  HcenluModel model = train_hcenlu(train, valid, a.cfg, &report, std::move(provider));
  for (const auto& e : report.history) {
    std::printf("epoch %zu  loss %.5f  intent F1 %.4f  tag F1 %.4f  overall F1 %.4f\n", e.epoch, e.train_loss,
                e.validation.intent.f1, e.validation.tag.f1, e.validation.overall.f1);
  }
  std::printf("best epoch %zu, %.1f s\n", report.best_epoch, report.seconds);
  model.save(a.out);
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

// ---- eval-nlu

int run_eval_nlu(const std::string& checkpoint, const std::string& test, bool json, const Common& c) {
  const HcenluModel model = load_model(checkpoint, c);
  const auto examples = examples_from_corpus(read_corpus(test));
  const NluScores s = nlu_component_metrics(model, examples);
  if (json) {
    auto prf = [](const Prf& p) { return ordered_json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; };
    std::cout << ordered_json{{"utterances", s.utterances}, {"intent", prf(s.intent)}, {"tag", prf(s.tag)},
                              {"overall", prf(s.overall)}}
                     .dump(2)
              << '\n';
  } else {
    std::cout << format_nlu_report(s);
  }
  return 0;
}

// ---- simulate

struct SimArgs {
  std::size_t episodes = 500;
  std::uint64_t seed = 7;
  bool oracle = false;
  std::string checkpoint;
  std::vector<std::string> domains;
  std::size_t max_turns = 40;
  bool macro = false;
  bool json = false;
  std::string logs;
};

int run_simulate(const SimArgs& a, const Common& c) {
  auto res = Resources::load(c.data_dir, c.templates);
  std::unique_ptr<HcenluModel> model;
  if (!a.oracle) model = std::make_unique<HcenluModel>(load_model(a.checkpoint, c));
  DialogueSystem system(res->schema, res->db, res->rules, res->templates, model.get());
  EpisodeConfig cfg;
  cfg.oracle = a.oracle;
  cfg.sim.max_turns = a.max_turns;
  if (!a.domains.empty()) {
    cfg.goals.domains = a.domains;
    cfg.goals.max_domains = std::min(cfg.goals.max_domains, a.domains.size());
  }
  const auto logs = run_episodes(system, a.episodes, a.seed, cfg);
  MetricsReport r = compute_metrics(logs, res->schema, a.macro ? Averaging::macro : Averaging::micro, a.max_turns);
  r.seed = a.seed;
  if (a.json) {
    std::cout << report_to_json(r).dump(2) << '\n';
  } else {
    std::cout << format_report(r);
  }
  if (!a.logs.empty()) {
    std::vector<ordered_json> rows;
    for (const auto& l : logs) rows.push_back(log_to_json(l));
    write_json_lines(a.logs, rows);
  }
  return 0;
}

// ---- gen-corpus

int run_gen_corpus(const ToyCorpusConfig& cfg, const std::string& train_out, const std::string& test_out,
                   const Common& c) {
  auto res = Resources::load(c.data_dir, c.templates);
  DialogueSystem system(res->schema, res->db, res->rules, res->templates);
  const ToyCorpus corpus = generate_toy_corpus(system, cfg);
  write_corpus(train_out, corpus.train);
  write_corpus(test_out, corpus.test);
  std::printf("train: %zu dialogues, %zu utterances -> %s\n", corpus.train.size(),
              examples_from_corpus(corpus.train).size(), train_out.c_str());
  std::printf("test: %zu dialogues, %zu utterances -> %s\n", corpus.test.size(), examples_from_corpus(corpus.test).size(),
              test_out.c_str());
  return 0;
}

// ---- mine-templates

int run_mine(const std::string& corpus_path, const std::string& out) {
  std::ifstream in(corpus_path);
  if (!in) throw std::runtime_error("cannot open " + corpus_path);
  std::string first;
  while (std::getline(in, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
  }
  // annotated dialogues carry "turns"; plain pairs carry "action"/"utterance"
  const bool annotated = !first.empty() && ordered_json::parse(first).contains("turns");
  const auto pairs = annotated ? nlg_pairs_from_corpus(read_corpus(corpus_path)) : load_nlg_corpus(corpus_path);
  MiningReport report;
  const TemplateStore store = mine_templates(pairs, &report);
  store.save(out);
  std::printf("mined %zu pairs (%zu skipped) into %zu signatures -> %s\n", report.mined, report.skipped, store.size(),
              out.c_str());
  return 0;
}

// ---- serve

struct ServeArgs {
  std::string checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::size_t> window;
  std::optional<double> threshold;
  std::size_t max_turns = 40;
  long idle_timeout = 1800;
  std::uint64_t seed = 1;
  std::string transcripts;
};

httplib::Server* g_server = nullptr;

int run_serve(const ServeArgs& a, const Common& c) {
  auto res = Resources::load(c.data_dir, c.templates);
  HcenluModel model = load_model(a.checkpoint, c);
  if (a.window) model.mutable_config().window = *a.window;
  if (a.threshold) model.mutable_config().threshold = *a.threshold;
  DialogueSystem system(res->schema, res->db, res->rules, res->templates, &model);
  ServiceConfig cfg;
  cfg.idle_timeout = std::chrono::seconds(a.idle_timeout);
  cfg.seed = a.seed;
  cfg.max_turns = a.max_turns;
  cfg.transcript_dir = a.transcripts;
  SessionManager sessions(system, cfg);
  httplib::Server server;
  register_routes(server, sessions);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::fprintf(stderr, "listening on http://%s:%d\n", a.host.c_str(), a.port);
  if (!server.listen(a.host, a.port)) {
    std::fprintf(stderr, "error: cannot listen on %s:%d\n", a.host.c_str(), a.port);
    return 1;
  }
  return 0;
}

// ---- chat

int run_chat(const std::string& checkpoint, std::uint64_t seed, bool debug, const Common& c) {
  auto res = Resources::load(c.data_dir, c.templates);
  HcenluModel model = load_model(checkpoint, c);
  DialogueSystem system(res->schema, res->db, res->rules, res->templates, &model);
  DialogState state = system.initial_state();
  Rng rng(seed);
  std::string line;
  std::printf("type a message, or an empty line to quit\n");
  while (!state.closed) {
    std::printf("usr> ");
    std::fflush(stdout);
    if (!std::getline(std::cin, line) || normalize(line).empty()) break;
    const auto r = system.respond(state, line, rng);
    if (debug) {
      std::printf("     acts:   %s\n", to_string(r.acts).c_str());
      std::printf("     action: %s\n", action_to_json(r.action).dump().c_str());
    }
    std::printf("sys> %s\n", r.utterance.c_str());
  }
  return 0;
}

// ---- ingest

int run_ingest(const std::string& input, std::size_t dim, const std::string& out) {
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot open " + input);
  const ContextualEmbeddingProvider p = ingest_embeddings(in, dim);
  p.save(out);
  std::printf("stored %zu vectors of dimension %zu -> %s\n", p.size(), p.dim(), out.c_str());
  return 0;
}

// "--config FILE" lines of key=value become "--key value" arguments, inserted
// right after the subcommand unless the same flag is already on the command
// line, so explicit flags win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.empty()) return args;
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  std::vector<std::string> injected;
  std::string line;
  while (std::getline(in, line)) {
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--config", "line without '=': " + line);
    auto trim = [](std::string v) {
      v.erase(0, v.find_first_not_of(" \t\r"));
      v.erase(v.find_last_not_of(" \t\r") + 1);
      return v;
    };
    const std::string flag = "--" + trim(line.substr(start, eq - start));
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) {
      injected.push_back(flag);
      injected.push_back(trim(line.substr(eq + 1)));
    }
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hceds: context-aware task-oriented dialogue system"};
  app.require_subcommand(1);
  Common common;

  auto* train = app.add_subcommand("train", "Train the NLU model on an annotated corpus");
  TrainArgs ta;
  add_common(train, common, true);
  std::string config_file;
  train->add_option("--config", config_file, "key=value file; keys are the option names below")->check(CLI::ExistingFile);
  train->add_option("--train", ta.train, "Training corpus (JSON lines)")->required()->check(CLI::ExistingFile);
  train->add_option("--valid", ta.valid, "Validation corpus")->check(CLI::ExistingFile);
  train->add_option("--out", ta.out, "Checkpoint to write")->required();
  train->add_option("--seed", ta.cfg.seed, "Initialisation, shuffling and dropout seed");
  train->add_option("--d_ctx", ta.cfg.d_ctx, "Contextual embedding width");
  train->add_option("--char_dim", ta.cfg.char_dim, "Character embedding width");
  train->add_option("--filters", ta.cfg.filters, "CharCNN filters");
  train->add_option("--hidden", ta.cfg.hidden, "Token BiLSTM hidden size");
  train->add_option("--sentence_hidden", ta.cfg.sentence_hidden, "Sentence BiLSTM hidden size");
  train->add_option("--window", ta.cfg.window, "Context window in turns");
  train->add_option("--threshold", ta.cfg.threshold, "Domain-intent probability threshold");
  train->add_option("--use_cnn", ta.cfg.use_cnn, "Use the character CNN");
  train->add_option("--tag_context", ta.cfg.tag_context, "Feed the context into the tag head");
  train->add_option("--intent_attention", ta.cfg.intent_attention, "Attend over the context for intents");
  train->add_option("--learning_rate", ta.cfg.learning_rate, "ADAM learning rate");
  train->add_option("--clip", ta.cfg.clip, "Global gradient norm limit");
  train->add_option("--dropout", ta.cfg.dropout, "Dropout rate");
  train->add_option("--epochs", ta.cfg.epochs, "Epochs");
  train->add_option("--batch", ta.cfg.batch, "Batch size");
  train->add_option("--bpe_merges", ta.cfg.bpe_merges, "BPE merges");

  auto* eval = app.add_subcommand("eval-nlu", "Score a checkpoint on an annotated corpus");
  std::string eval_ckpt, eval_test;
  bool eval_json = false;
  add_common(eval, common, true);
  eval->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--test", eval_test, "Test corpus")->required()->check(CLI::ExistingFile);
  eval->add_flag("--json", eval_json, "Print JSON instead of the table");

  auto* sim = app.add_subcommand("simulate", "Run simulated dialogues and report metrics");
  SimArgs sa;
  add_common(sim, common, true);
  sim->add_option("--episodes", sa.episodes, "Number of episodes");
  sim->add_option("--seed", sa.seed, "Base seed");
  auto* oracle = sim->add_flag("--oracle", sa.oracle, "Pass simulator acts straight to the tracker");
  sim->add_option("--checkpoint", sa.checkpoint, "NLU checkpoint (when not --oracle)")
      ->check(CLI::ExistingFile)
      ->excludes(oracle);
  sim->add_option("--domains", sa.domains, "Restrict goals to these domains");
  sim->add_option("--max-turns", sa.max_turns, "Turn limit L");
  sim->add_flag("--macro", sa.macro, "Macro-average inform precision/recall");
  sim->add_flag("--json", sa.json, "Print JSON");
  sim->add_option("--logs", sa.logs, "Write per-episode logs as JSON lines");

  auto* gen = app.add_subcommand("gen-corpus", "Generate the simulated toy NLU corpus");
  ToyCorpusConfig gc;
  std::string gen_train = "train.corpus", gen_test = "test.corpus";
  add_common(gen, common, false);
  gen->add_option("--domains", gc.domains, "Goal domains");
  gen->add_option("--train-utterances", gc.train_utterances, "Minimum user utterances in the training split");
  gen->add_option("--test-utterances", gc.test_utterances, "Minimum user utterances in the test split");
  gen->add_option("--seed", gc.seed, "Seed");
  gen->add_option("--train-out", gen_train, "Training corpus path");
  gen->add_option("--test-out", gen_test, "Test corpus path");

  auto* mine = app.add_subcommand("mine-templates", "Mine NLG templates from system turns");
  std::string mine_in, mine_out;
  mine->add_option("--corpus", mine_in, "Annotated corpus or action/utterance pairs")->required()->check(CLI::ExistingFile);
  mine->add_option("--out", mine_out, "Template store to write")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP chat service");
  ServeArgs sv;
  add_common(serve, common, true);
  serve->add_option("--config", config_file, "key=value file; keys are the option names below")->check(CLI::ExistingFile);
  serve->add_option("--checkpoint", sv.checkpoint, "NLU checkpoint")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", sv.host, "Bind address");
  serve->add_option("--port", sv.port, "Port");
  serve->add_option("--window", sv.window, "Override the context window w");
  serve->add_option("--threshold", sv.threshold, "Override the intent threshold");
  serve->add_option("--max-turns", sv.max_turns, "User turns per session");
  serve->add_option("--idle-timeout", sv.idle_timeout, "Seconds before an idle session expires");
  serve->add_option("--seed", sv.seed, "Session rng seed");
  serve->add_option("--transcripts", sv.transcripts, "Directory for per-session transcripts");

  auto* chat = app.add_subcommand("chat", "Chat with the system in the terminal");
  std::string chat_ckpt;
  std::uint64_t chat_seed = 1;
  bool chat_debug = false;
  add_common(chat, common, true);
  chat->add_option("--checkpoint", chat_ckpt, "NLU checkpoint")->required()->check(CLI::ExistingFile);
  chat->add_option("--seed", chat_seed, "Policy rng seed");
  chat->add_flag("--debug", chat_debug, "Show inferred acts and system actions");

  auto* ingest = app.add_subcommand("ingest", "Convert a text embedding dump into a binary store");
  std::string ingest_in, ingest_out;
  std::size_t ingest_dim = 768;
  ingest->add_option("--input", ingest_in, "Lines of sentence<TAB>position<TAB>floats")->required()->check(CLI::ExistingFile);
  ingest->add_option("--dim", ingest_dim, "Vector width");
  ingest->add_option("--out", ingest_out, "Store to write")->required();

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train) return run_train(ta, common);
    if (*eval) return run_eval_nlu(eval_ckpt, eval_test, eval_json, common);
    if (*sim) {
      if (!sa.oracle && sa.checkpoint.empty()) {
        std::cerr << "error: simulate needs --oracle or --checkpoint\n\n" << sim->help();
        return 2;
      }
      return run_simulate(sa, common);
    }
    if (*gen) return run_gen_corpus(gc, gen_train, gen_test, common);
    if (*mine) return run_mine(mine_in, mine_out);
    if (*serve) return run_serve(sv, common);
    if (*chat) return run_chat(chat_ckpt, chat_seed, chat_debug, common);
    if (*ingest) return run_ingest(ingest_in, ingest_dim, ingest_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
