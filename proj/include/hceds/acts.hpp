#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace hceds {

/// (domain, intent, slot, value). Domains are capitalised as in the label
/// inventory ("Attraction"); general acts use the domain "general".
struct DialogAct {
  std::string domain;
  std::string intent;
  std::string slot = "none";
  std::string value = "none";

  /// "Attraction-Inform"
  std::string label() const { return domain + "-" + intent; }

  friend bool operator==(const DialogAct&, const DialogAct&) = default;
  friend auto operator<=>(const DialogAct&, const DialogAct&) = default;
};

using SlotValue = std::pair<std::string, std::string>;

/// Splits "Attraction-Inform" into ("Attraction", "Inform").
std::pair<std::string, std::string> split_label(std::string_view label);

/// "attraction" -> "Attraction"; "general" stays lowercase.
std::string act_domain(std::string_view domain);
/// "Attraction" -> "attraction".
std::string domain_key(std::string_view domain);

/// Groups acts by label in first-seen order: {"Attraction-Inform": [["Type", "museum"]]}.
nlohmann::ordered_json acts_to_json(const std::vector<DialogAct>& acts);
std::vector<DialogAct> acts_from_json(const nlohmann::ordered_json& j);

std::string to_string(const std::vector<DialogAct>& acts);

/// A_t: grouped acts plus the session-closing flag.
struct SystemAction {
  std::vector<DialogAct> acts;
  bool close_session = false;

  bool empty() const { return acts.empty() && !close_session; }
  friend bool operator==(const SystemAction&, const SystemAction&) = default;
};

nlohmann::ordered_json action_to_json(const SystemAction& a);

}  // namespace hceds
