#include "hceds/dialog_state.hpp"

#include <algorithm>

#include "hceds/entity_db.hpp"

namespace hceds {

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

bool is_booking_confirmation(const DialogAct& a) {
  return a.intent == "Book" || (domain_key(a.domain) == "taxi" && a.intent == "Inform" && a.slot == "Car");
}

}  // namespace

DialogState init_state(const Schema& schema) {
  DialogState s;
  for (const auto& d : schema.domains()) {
    auto& b = s.belief_state[d.name];
    for (const auto& f : d.semi) b.semi[f] = "";
    for (const auto& f : d.book) b.book[f] = "";
  }
  return s;
}

DialogState update(const DialogState& prev, const std::vector<DialogAct>& user_acts, std::string_view user_utterance,
                   const Schema& schema, std::vector<std::string>* warnings) {
  DialogState s = prev;
  s.user_action = user_acts;
  s.history.push_back({"user", std::string(user_utterance)});
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };
  for (const auto& a : user_acts) {
    const std::string dk = domain_key(a.domain);
    if (dk == "general") continue;
    const DomainSchema* ds = schema.find(dk);
    if (!ds) {
      warn("dropping act " + a.label() + " for unknown domain");
      continue;
    }
    if (a.intent == "Request") {
      if (a.slot == "none") continue;
      auto& req = s.request_state[dk];
      if (std::find(req.begin(), req.end(), a.slot) == req.end()) req.push_back(a.slot);
    } else if (a.intent == "Inform") {
      if (a.slot == "none") continue;
      const std::string field = schema.field(a.slot);
      std::string value = normalize_value(a.value);
      if (value == "any" || value == "dont care" || value == "do n't care" || value == "don't care") value = "dontcare";
      if (ds->is_boolean(field) && value != "no" && value != "dontcare") value = "yes";
      auto& belief = s.belief_state[dk];
      if (ds->is_book(field)) {
        belief.book[field] = value;
      } else if (ds->is_semi(field)) {
        belief.semi[field] = value;
      } else {
        warn("dropping slot " + a.slot + " not tracked for " + dk);
      }
    }
  }
  return s;
}

DialogState fulfilled_requests(const DialogState& state, const SystemAction& action) {
  DialogState s = state;
  for (const auto& a : action.acts) {
    if (a.intent != "Inform" && a.intent != "Book") continue;
    auto it = s.request_state.find(domain_key(a.domain));
    if (it == s.request_state.end()) continue;
    auto& slots = it->second;
    slots.erase(std::remove(slots.begin(), slots.end(), a.slot), slots.end());
    if (slots.empty()) s.request_state.erase(it);
  }
  return s;
}

DialogState record_system_turn(const DialogState& state, const SystemAction& action, std::string_view utterance,
                               const Schema& schema) {
  DialogState s = fulfilled_requests(state, action);
  std::map<std::string, BookedEntry> confirmations;
  for (const auto& a : action.acts) {
    const std::string dk = domain_key(a.domain);
    const bool group_has_confirmation =
        std::any_of(action.acts.begin(), action.acts.end(),
                    [&](const DialogAct& b) { return b.label() == a.label() && is_booking_confirmation(b); });
    if (!group_has_confirmation || !schema.find(dk)) continue;
    auto& e = confirmations[dk];
    if (a.slot == "Ref") {
      e.reference = a.value;
    } else if (a.slot == "Name" || a.slot == "Id") {
      e.name = a.value;
    } else {
      e.details[a.slot] = a.value;
    }
  }
  for (auto& [dk, e] : confirmations) {
    auto& booked = s.belief_state[dk].booked;
    if (std::find(booked.begin(), booked.end(), e) == booked.end()) booked.push_back(std::move(e));
  }
  s.history.push_back({"system", std::string(utterance)});
  s.closed = s.closed || action.close_session;
  return s;
}

nlohmann::ordered_json state_to_json(const DialogState& state) {
  nlohmann::ordered_json j;
  j["user_action"] = acts_to_json(state.user_action);
  auto& bs = j["belief_state"] = nlohmann::ordered_json::object();
  for (const auto& [d, b] : state.belief_state) {
    nlohmann::ordered_json booked = nlohmann::ordered_json::array();
    for (const auto& e : b.booked) {
      nlohmann::ordered_json item = {{"name", e.name}, {"reference", e.reference}};
      for (const auto& [k, v] : e.details) item[k] = v;
      booked.push_back(item);
    }
    nlohmann::ordered_json book = nlohmann::ordered_json::object();
    book["booked"] = booked;
    for (const auto& [k, v] : b.book) book[k] = v;
    bs[d] = {{"book", book}, {"semi", b.semi}};
  }
  auto& rs = j["request_state"] = nlohmann::ordered_json::object();
  for (const auto& [d, slots] : state.request_state) rs[d] = slots;
  auto& h = j["history"] = nlohmann::ordered_json::array();
  for (const auto& t : state.history) h.push_back({t.speaker, t.text});
  j["closed"] = state.closed;
  return j;
}

std::uint64_t state_hash(const DialogState& state) { return fnv1a64(state_to_json(state).dump()); }

}  // namespace hceds
