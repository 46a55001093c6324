#include "hceds/corpus.hpp"

#include <fstream>
#include <set>

#include "hceds/checkpoint.hpp"
#include "hceds/evaluation.hpp"

namespace hceds {

using nlohmann::ordered_json;

nlohmann::ordered_json dialogue_to_json(const AnnotatedDialogue& d) {
  ordered_json turns = ordered_json::array();
  for (const auto& t : d.turns) {
    const auto words = split_words(normalize(t.text));
    ordered_json spans = ordered_json::array();
    for (const auto& s : t.spans) {
      const auto plus = s.label.rfind('+');
      spans.push_back({s.label.substr(0, plus), s.label.substr(plus + 1), join_words(words, s.first_word, s.last_word),
                       s.first_word, s.last_word});
    }
    ordered_json j = {{"speaker", t.speaker}, {"text", t.text}, {"dialog_act", acts_to_json(t.acts)}, {"span_info", spans}};
    if (t.context_dependent) j["context_dependent"] = true;
    turns.push_back(std::move(j));
  }
  return {{"id", d.id}, {"turns", turns}};
}

AnnotatedDialogue dialogue_from_json(const ordered_json& j) {
  AnnotatedDialogue d;
  d.id = j.value("id", "");
  for (const auto& jt : j.at("turns")) {
    AnnotatedTurn t;
    t.speaker = jt.at("speaker").get<std::string>();
    if (t.speaker != "user" && t.speaker != "system") throw FormatError("unknown speaker '" + t.speaker + "'");
    t.text = jt.at("text").get<std::string>();
    if (jt.contains("dialog_act")) t.acts = acts_from_json(jt.at("dialog_act"));
    t.context_dependent = jt.value("context_dependent", false);
    const std::size_t n_words = split_words(normalize(t.text)).size();
    for (const auto& s : jt.value("span_info", ordered_json::array())) {
      if (!s.is_array() || s.size() != 5) throw FormatError("span_info entries need 5 fields");
      SlotSpan span{s[0].get<std::string>() + "+" + s[1].get<std::string>(), s[3].get<std::size_t>(),
                    s[4].get<std::size_t>()};
      if (span.first_word > span.last_word || span.last_word >= n_words) {
        throw AnnotationError("span " + span.label + " [" + std::to_string(span.first_word) + "," +
                              std::to_string(span.last_word) + "] outside '" + t.text + "'");
      }
      t.spans.push_back(std::move(span));
    }
    d.turns.push_back(std::move(t));
  }
  return d;
}

std::vector<AnnotatedDialogue> read_corpus(std::istream& in) {
  std::vector<AnnotatedDialogue> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(dialogue_from_json(ordered_json::parse(line)));
    } catch (const AnnotationError& e) {
      throw AnnotationError("line " + std::to_string(n) + ": " + e.what());
    } catch (const std::exception& e) {
      throw FormatError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AnnotatedDialogue> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus " + path.string());
  return read_corpus(in);
}

void write_corpus(std::ostream& out, const std::vector<AnnotatedDialogue>& dialogues) {
  for (const auto& d : dialogues) out << dialogue_to_json(d).dump() << '\n';
}

void write_corpus(const std::filesystem::path& path, const std::vector<AnnotatedDialogue>& dialogues) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write corpus " + path.string());
  write_corpus(out, dialogues);
}

std::vector<std::string> act_labels(const std::vector<DialogAct>& acts) {
  std::vector<std::string> out;
  for (const auto& a : acts) {
    const std::string l = a.label();
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

std::vector<TrainingExample> examples_from_corpus(const std::vector<AnnotatedDialogue>& dialogues) {
  std::vector<TrainingExample> out;
  for (const auto& d : dialogues) {
    std::vector<Turn> history;
    for (const auto& t : d.turns) {
      if (t.speaker == "user" && !normalize(t.text).empty()) {
        TrainingExample ex;
        ex.utterance = t.text;
        ex.context = history;
        ex.labels = act_labels(t.acts);
        ex.spans = t.spans;
        ex.context_dependent = t.context_dependent;
        out.push_back(std::move(ex));
      }
      history.push_back({t.speaker, t.text});
    }
  }
  return out;
}

std::vector<std::pair<std::vector<DialogAct>, std::string>> nlg_pairs_from_corpus(const std::vector<AnnotatedDialogue>& dialogues) {
  std::vector<std::pair<std::vector<DialogAct>, std::string>> out;
  for (const auto& d : dialogues) {
    for (const auto& t : d.turns) {
      if (t.speaker == "system" && !t.acts.empty()) out.push_back({t.acts, t.text});
    }
  }
  return out;
}

AnnotatedDialogue dialogue_from_log(const DialogueLog& log, const std::string& id) {
  AnnotatedDialogue d;
  d.id = id;
  for (const auto& r : log.turns) {
    if (r.user_utterance.empty()) continue;
    d.turns.push_back({"user", r.user_utterance, r.gold_acts, r.spans, r.context_dependent});
    if (!r.system_utterance.empty()) d.turns.push_back({"system", r.system_utterance, r.action.acts, {}, false});
  }
  return d;
}

ToyCorpus generate_toy_corpus(const DialogueSystem& system, const ToyCorpusConfig& config) {
  EpisodeConfig ep;
  ep.goals.domains = config.domains;
  ep.goals.min_domains = 1;
  ep.goals.max_domains = std::min<std::size_t>(2, config.domains.size());
  ep.oracle = true;

  ToyCorpus corpus;
  std::size_t episode = 0;
  auto fill = [&](std::vector<AnnotatedDialogue>& split, std::size_t target, const char* prefix) {
    std::size_t utterances = 0;
    while (utterances < target) {
      const std::uint64_t seed = episode_seed(config.seed, episode++);
      Rng rng(seed);
      const UserGoal goal = sample_goal(system.schema(), system.db(), rng, ep.goals);
      const DialogueLog log = run_episode(system, goal, seed, ep);
      if (!log.error.empty()) continue;
      AnnotatedDialogue d = dialogue_from_log(log, prefix + std::to_string(episode - 1));
      for (const auto& t : d.turns) utterances += t.speaker == "user";
      split.push_back(std::move(d));
    }
  };
  fill(corpus.train, config.train_utterances, "train-");
  fill(corpus.test, config.test_utterances, "test-");
  return corpus;
}

}  // namespace hceds
