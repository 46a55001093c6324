#include "hceds/acts.hpp"

#include <cctype>
#include <stdexcept>

namespace hceds {

std::pair<std::string, std::string> split_label(std::string_view label) {
  const auto dash = label.find('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 1 == label.size()) {
    throw std::invalid_argument("malformed domain-intent label '" + std::string(label) + "'");
  }
  return {std::string(label.substr(0, dash)), std::string(label.substr(dash + 1))};
}

std::string act_domain(std::string_view domain) {
  std::string out = domain_key(domain);
  if (out == "general" || out.empty()) return out;
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string domain_key(std::string_view domain) {
  std::string out(domain);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

nlohmann::ordered_json acts_to_json(const std::vector<DialogAct>& acts) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& a : acts) j[a.label()].push_back({a.slot, a.value});
  return j;
}

std::vector<DialogAct> acts_from_json(const nlohmann::ordered_json& j) {
  std::vector<DialogAct> acts;
  for (const auto& [label, pairs] : j.items()) {
    auto [domain, intent] = split_label(label);
    for (const auto& sv : pairs) {
      acts.push_back({domain, intent, sv.at(0).get<std::string>(), sv.at(1).get<std::string>()});
    }
  }
  return acts;
}

std::string to_string(const std::vector<DialogAct>& acts) { return acts_to_json(acts).dump(); }

nlohmann::ordered_json action_to_json(const SystemAction& a) {
  nlohmann::ordered_json j = acts_to_json(a.acts);
  if (a.close_session) j["close session"] = true;
  return j;
}

}  // namespace hceds
