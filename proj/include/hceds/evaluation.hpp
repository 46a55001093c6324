#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hceds/pipeline.hpp"
#include "hceds/user_sim.hpp"
#include "json.hpp"

namespace hceds {

struct TurnRecord {
  std::vector<DialogAct> gold_acts;
  std::vector<DialogAct> predicted_acts;
  std::string user_utterance;
  /// Word spans of the realised utterance.
  std::vector<SlotSpan> spans;
  bool context_dependent = false;
  std::uint64_t state_hash = 0;
  SystemAction action;
  std::string system_utterance;
};

struct DialogueLog {
  std::uint64_t seed = 0;
  UserGoal goal;
  /// Goal after the simulator's relaxations; success is judged against it.
  UserGoal final_goal;
  std::vector<TurnRecord> turns;
  bool success = false;
  /// The user finished (said bye) before the turn limit.
  bool terminated = false;
  std::vector<std::string> booked_domains;
  std::size_t unanswered_requests = 0;
  std::string error;
};

nlohmann::ordered_json log_to_json(const DialogueLog& log);

struct EpisodeConfig {
  GoalConfig goals;
  SimConfig sim;
  /// Acts go straight from simulator to state tracker, skipping NLU.
  bool oracle = true;
};

/// Per-episode seed: splitmix64(seed + i).
std::uint64_t episode_seed(std::uint64_t seed, std::size_t i);

DialogueLog run_episode(const DialogueSystem& system, const UserGoal& goal, std::uint64_t seed,
                        const EpisodeConfig& config = {});
/// Samples a goal per episode. Exceptions inside an episode are recorded in
/// its log as a failure.
std::vector<DialogueLog> run_episodes(const DialogueSystem& system, std::size_t n, std::uint64_t seed,
                                      const EpisodeConfig& config = {});

/// (success ? 2L : -L) - turns.
double compute_return(bool success, double turns, std::size_t max_turns = 40);
double compute_return(const DialogueLog& log, std::size_t max_turns = 40);

/// Requested slots of the goal that never got a usable value.
std::size_t unanswered_requests(const UserGoal& goal, const std::vector<SystemAction>& actions);

enum class Averaging { micro, macro };

struct MetricsReport {
  double success_rate = 0;
  double average_return = 0;
  double average_turns = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double book_rate = 0;
  /// No episode needed a booking; book_rate is then 1.0 by convention.
  bool book_rate_vacuous = false;
  std::size_t episodes = 0;
  std::uint64_t seed = 0;
  double termination_rate = 0;
  std::size_t unanswered_requests = 0;
};

/// P/R/F1 compare the (domain, slot) pairs the system informed, restricted to
/// each domain's requestable slots, with the pairs the goal requested.
MetricsReport compute_metrics(const std::vector<DialogueLog>& logs, const Schema& schema,
                              Averaging averaging = Averaging::micro, std::size_t max_turns = 40);

std::string format_report(const MetricsReport& r);
nlohmann::ordered_json report_to_json(const MetricsReport& r);

double f1_score(double precision, double recall);

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

/// Micro-averaged from counts; precision is 0 when nothing was predicted.
Prf prf_from_counts(std::size_t tp, std::size_t predicted, std::size_t gold);

/// What an NLU produced (or should produce) for one utterance.
struct NluOutcome {
  std::vector<std::string> labels;
  std::vector<SlotSpan> spans;
  std::vector<DialogAct> acts;
};

struct NluScores {
  Prf intent;
  Prf tag;
  Prf overall;
  std::size_t utterances = 0;
};

/// Intent: label sets. Tag: spans with exact label and boundaries. Overall:
/// decoded act tuples. All micro-averaged; duplicates within one utterance
/// count once.
NluScores score_nlu(const std::vector<NluOutcome>& gold, const std::vector<NluOutcome>& predicted);

std::string format_nlu_report(const NluScores& s);

}  // namespace hceds
