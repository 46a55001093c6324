#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "hceds/acts.hpp"
#include "hceds/entity_db.hpp"
#include "hceds/schema.hpp"
#include "hceds/tensor.hpp"
#include "hceds/text.hpp"
#include "json.hpp"

namespace hceds {

struct DomainGoal {
  std::string domain;
  /// Act slot -> value ("Type" -> "museum").
  std::vector<SlotValue> constraints;
  std::vector<std::string> requests;
  std::vector<SlotValue> book;

  friend bool operator==(const DomainGoal&, const DomainGoal&) = default;
};

struct UserGoal {
  std::vector<DomainGoal> domains;

  const DomainGoal* find(const std::string& domain) const;
  DomainGoal* find(const std::string& domain);
  friend bool operator==(const UserGoal&, const UserGoal&) = default;
};

nlohmann::ordered_json goal_to_json(const UserGoal& g);
UserGoal goal_from_json(const nlohmann::ordered_json& j);

struct GoalConfig {
  std::vector<std::string> domains = {"attraction", "hotel", "restaurant", "train", "taxi", "police", "hospital"};
  std::size_t min_domains = 1;
  std::size_t max_domains = 3;
  double booking_probability = 0.5;
};

/// Constraints are copied from a real record so at least one entity matches.
UserGoal sample_goal(const Schema& schema, const DomainDb& db, Rng& rng, const GoalConfig& config = {});

struct SimConfig {
  std::size_t max_turns = 40;
  /// Chance of also popping a next item of a different kind.
  double mixed_pop_probability = 0.3;
  /// Chance of a "thanks" act when the user moves to a new domain.
  double thank_on_switch_probability = 0.3;
};

struct AgendaItem {
  enum class Kind { inform, request, book };
  std::string domain;
  Kind kind = Kind::inform;
  std::vector<DialogAct> acts;
};

class UserSimulator {
 public:
  UserSimulator(const Schema& schema, const DomainDb& db, UserGoal goal, std::uint64_t seed, SimConfig config = {});

  struct Step {
    std::vector<DialogAct> acts;
    bool done = false;
  };

  /// Reacts to the previous system action (nullptr on the first turn), then
  /// pops up to two agenda items. An empty agenda yields thank + bye and
  /// done; reaching max_turns yields done with no acts.
  Step step(const SystemAction* system_action);

  const UserGoal& goal() const { return goal_; }
  std::size_t agenda_size() const { return agenda_.size(); }
  std::size_t turns() const { return turns_; }
  bool hit_turn_limit() const { return hit_limit_; }

 private:
  void react(const SystemAction& action);
  void relax(const std::string& domain, const std::vector<std::string>& slots);
  bool request_open(const std::string& domain, const std::string& slot) const;
  void push_inform(const std::string& domain, const std::string& slot, const std::string& value);
  AgendaItem pop();

  const Schema& schema_;
  const DomainDb& db_;
  UserGoal goal_;
  Rng rng_;
  SimConfig config_;
  std::vector<AgendaItem> agenda_;  // back() is the top
  std::vector<AgendaItem> last_popped_;
  std::map<std::string, std::set<std::string>> answered_;
  std::set<std::string> booked_;
  std::map<std::pair<std::string, std::string>, int> nooffers_;
  std::map<std::string, int> book_retries_;
  std::string last_domain_;
  std::size_t turns_ = 0;
  bool hit_limit_ = false;
  bool finished_ = false;
};

struct RealizedUtterance {
  std::string text;
  std::vector<DialogAct> acts;
  /// Word-level spans labelled "Domain-Intent+Slot".
  std::vector<SlotSpan> spans;
  /// True when some act was phrased without naming its domain.
  bool context_dependent = false;
};

struct RealizeOptions {
  /// Domain whose name may be left implicit (the previous turn's domain).
  std::string implicit_domain;
};

/// Template realisation of user acts. Every informed value appears verbatim;
/// requested slots are spanned by their slot words.
RealizedUtterance realize_user_utterance(const std::vector<DialogAct>& acts, Rng& rng, const RealizeOptions& options = {});

/// Success iff every requested slot got a value and some entity matching the
/// final constraints carries all of them, and every needed booking was
/// confirmed with a reference.
bool judge_success(const UserGoal& goal, const std::vector<SystemAction>& system_actions, const Schema& schema,
                   const DomainDb& db);

}  // namespace hceds
