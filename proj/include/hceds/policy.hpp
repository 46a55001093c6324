#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hceds/acts.hpp"
#include "hceds/dialog_state.hpp"
#include "hceds/entity_db.hpp"
#include "hceds/schema.hpp"
#include "hceds/tensor.hpp"
#include "json.hpp"

namespace hceds {

enum class Cardinality { none, one, many };

/// One row of the rule table. "*" matches any domain in D (or any intent);
/// "general" matches general acts. slot_kind is "any", "book" or "semi".
struct PolicyRule {
  std::string domain = "*";
  std::string intent = "*";
  std::string cardinality = "any";
  std::string slot_kind = "any";
  /// Action kinds: choice, recommend, nooffer, book, taxi, answer, close,
  /// general:<intent>.
  std::vector<std::string> actions;
};

struct RuleTable {
  std::vector<PolicyRule> rules;
  std::size_t max_slots = 5;

  static RuleTable load(const std::filesystem::path& path);
  static RuleTable from_json(const nlohmann::json& j);
  /// First rule that matches, or nullptr.
  const PolicyRule* match(const std::string& domain, const std::string& intent, Cardinality c,
                          const std::string& slot_kind) const;
};

/// Groups by domain-intent in first-seen order, drops exact duplicates and
/// keeps at most max_slots pairs per group.
std::vector<DialogAct> merge_rule(const std::vector<DialogAct>& partials, std::size_t max_slots = 5);

class Policy {
 public:
  Policy(const Schema& schema, const DomainDb& db, RuleTable rules);

  /// Iterates the current turn's user acts: Request and Inform acts of
  /// domains in D go to request_policy / inform_policy, everything else to
  /// general_policy; the result is merge_rule of the accumulated partials.
  SystemAction decide(const DialogState& state, Rng& rng) const;

  /// Belief constraints of a domain used as DB filters.
  std::vector<QueryConstraint> constraints(const DialogState& state, const std::string& domain) const;
  /// The entity the system is talking about: the first DB match of the
  /// current constraints, or nullptr.
  const EntityRecord* selected_entity(const DialogState& state, const std::string& domain) const;

  const Schema& schema() const { return schema_; }
  const DomainDb& db() const { return db_; }
  const RuleTable& rules() const { return rules_; }

  struct Turn {
    const DialogState& state;
    Rng& rng;
    std::vector<DialogAct> acts;
    bool close = false;
    /// Domains that already produced a booking outcome this turn.
    std::map<std::string, std::vector<DialogAct>> bookings;
  };

  void request_policy(Turn& t, const std::vector<const EntityRecord*>& db_result, const std::string& domain,
                      const std::string& slot) const;
  void inform_policy(Turn& t, const std::vector<const EntityRecord*>& db_result, const std::string& domain,
                     const std::string& slot) const;
  void general_policy(Turn& t, const std::string& domain, const std::string& intent, const std::string& slot) const;

 private:
  void run(Turn& t, const PolicyRule& rule, const std::vector<const EntityRecord*>& db_result,
           const std::string& domain, const std::string& slot, bool slot_is_book) const;
  void book(Turn& t, const std::vector<const EntityRecord*>& db_result, const std::string& domain,
            bool slot_is_book) const;
  void book_taxi(Turn& t, const std::string& domain) const;
  std::string answer(const DialogState& state, const EntityRecord* entity, const std::string& domain,
                     const std::string& slot) const;

  const Schema& schema_;
  const DomainDb& db_;
  RuleTable rules_;
};

}  // namespace hceds
