#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hceds/acts.hpp"
#include "hceds/hcenlu.hpp"
#include "hceds/pipeline.hpp"
#include "hceds/user_sim.hpp"

namespace hceds {

/// One turn of an annotated dialogue. Spans index the words of
/// normalize(text) and are labelled "Domain-Intent+Slot".
struct AnnotatedTurn {
  std::string speaker;
  std::string text;
  std::vector<DialogAct> acts;
  std::vector<SlotSpan> spans;
  bool context_dependent = false;
};

struct AnnotatedDialogue {
  std::string id;
  std::vector<AnnotatedTurn> turns;
};

/// One JSON object per line:
///   {"id": "...", "turns": [{"speaker": "user", "text": "...",
///     "dialog_act": {"Hotel-Inform": [["Parking", "yes"]]},
///     "span_info": [["Hotel-Inform", "Parking", "parking", 3, 3]],
///     "context_dependent": false}, ...]}
/// Throws FormatError (with the line number) on malformed records and
/// AnnotationError on spans outside their turn.
std::vector<AnnotatedDialogue> read_corpus(std::istream& in);
std::vector<AnnotatedDialogue> read_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const std::vector<AnnotatedDialogue>& dialogues);
void write_corpus(const std::filesystem::path& path, const std::vector<AnnotatedDialogue>& dialogues);

nlohmann::ordered_json dialogue_to_json(const AnnotatedDialogue& d);
AnnotatedDialogue dialogue_from_json(const nlohmann::ordered_json& j);

/// Distinct act labels in first-seen order.
std::vector<std::string> act_labels(const std::vector<DialogAct>& acts);

/// One example per user turn; its context is every earlier turn.
std::vector<TrainingExample> examples_from_corpus(const std::vector<AnnotatedDialogue>& dialogues);

/// (system acts, system utterance) pairs of the system turns, for mining.
std::vector<std::pair<std::vector<DialogAct>, std::string>> nlg_pairs_from_corpus(const std::vector<AnnotatedDialogue>& dialogues);

struct ToyCorpusConfig {
  std::vector<std::string> domains = {"attraction", "hotel"};
  std::size_t train_utterances = 2000;
  std::size_t test_utterances = 400;
  std::uint64_t seed = 11;
};

struct ToyCorpus {
  std::vector<AnnotatedDialogue> train;
  std::vector<AnnotatedDialogue> test;
};

/// Oracle simulator dialogues over the configured domains, with the user
/// turns realised from templates. Dialogues are added until each split holds
/// at least the requested number of user utterances.
ToyCorpus generate_toy_corpus(const DialogueSystem& system, const ToyCorpusConfig& config = {});

/// Converts a simulated episode into an annotated dialogue.
AnnotatedDialogue dialogue_from_log(const DialogueLog& log, const std::string& id);

}  // namespace hceds
