#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hceds/acts.hpp"
#include "hceds/schema.hpp"
#include "json.hpp"

namespace hceds {

struct BookedEntry {
  std::string name;
  std::string reference;
  /// Other confirmed values (taxi car and phone).
  std::map<std::string, std::string> details;

  friend bool operator==(const BookedEntry&, const BookedEntry&) = default;
};

struct DomainBelief {
  std::map<std::string, std::string> semi;
  std::map<std::string, std::string> book;
  std::vector<BookedEntry> booked;

  friend bool operator==(const DomainBelief&, const DomainBelief&) = default;
};

struct Turn {
  std::string speaker;
  std::string text;

  friend bool operator==(const Turn&, const Turn&) = default;
};

/// S_t.
struct DialogState {
  std::vector<DialogAct> user_action;
  std::map<std::string, DomainBelief> belief_state;
  /// domain -> requested act slots, in the order they were asked.
  std::map<std::string, std::vector<std::string>> request_state;
  std::vector<Turn> history;
  bool closed = false;

  friend bool operator==(const DialogState&, const DialogState&) = default;
};

DialogState init_state(const Schema& schema);

/// Records the user's acts: Inform writes slot values (book slots to book,
/// the rest to semi, latest value wins), Request adds to request_state. Acts
/// naming an unknown domain or slot are dropped and described in *warnings.
DialogState update(const DialogState& prev, const std::vector<DialogAct>& user_acts, std::string_view user_utterance,
                   const Schema& schema, std::vector<std::string>* warnings = nullptr);

/// Removes requests answered by the action's Inform acts.
DialogState fulfilled_requests(const DialogState& state, const SystemAction& action);

/// Drains answered requests, records booking confirmations, appends the
/// system turn to the history and latches the closed flag.
DialogState record_system_turn(const DialogState& state, const SystemAction& action, std::string_view utterance,
                               const Schema& schema);

nlohmann::ordered_json state_to_json(const DialogState& state);
std::uint64_t state_hash(const DialogState& state);

}  // namespace hceds
