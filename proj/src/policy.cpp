#include "hceds/policy.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace hceds {

namespace {

bool in_domain_list(const std::string& dk) {
  return std::find(kDomainList.begin(), kDomainList.end(), dk) != kDomainList.end();
}

Cardinality cardinality_of(std::size_t n) {
  return n == 0 ? Cardinality::none : (n == 1 ? Cardinality::one : Cardinality::many);
}

bool cardinality_matches(const std::string& pattern, Cardinality c) {
  if (pattern == "any") return true;
  if (pattern == "none") return c == Cardinality::none;
  if (pattern == "one") return c == Cardinality::one;
  if (pattern == "many") return c == Cardinality::many;
  if (pattern == "some") return c != Cardinality::none;
  return false;
}

std::string taxi_phone(Rng& rng) {
  std::uniform_int_distribution<int> digit(0, 9);
  std::string p = "8";
  for (int i = 0; i < 10; ++i) p.push_back(static_cast<char>('0' + digit(rng)));
  return p;
}

}  // namespace

RuleTable RuleTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rule table " + path.string());
  return from_json(nlohmann::json::parse(in));
}

RuleTable RuleTable::from_json(const nlohmann::json& j) {
  RuleTable t;
  t.max_slots = j.value("max_slots_per_act", std::size_t{5});
  for (const auto& r : j.at("rules")) {
    PolicyRule rule;
    rule.domain = r.value("domain", "*");
    rule.intent = r.value("intent", "*");
    rule.cardinality = r.value("cardinality", "any");
    rule.slot_kind = r.value("slot_kind", "any");
    rule.actions = r.at("actions").get<std::vector<std::string>>();
    t.rules.push_back(std::move(rule));
  }
  return t;
}

const PolicyRule* RuleTable::match(const std::string& domain, const std::string& intent, Cardinality c,
                                   const std::string& slot_kind) const {
  const std::string dk = domain_key(domain);
  for (const auto& r : rules) {
    const bool domain_ok = r.domain == dk || (r.domain == "*" && dk != "general");
    if (!domain_ok) continue;
    if (r.intent != "*" && r.intent != intent) continue;
    if (!cardinality_matches(r.cardinality, c)) continue;
    if (r.slot_kind != "any" && r.slot_kind != slot_kind) continue;
    return &r;
  }
  return nullptr;
}

std::vector<DialogAct> merge_rule(const std::vector<DialogAct>& partials, std::size_t max_slots) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<DialogAct>> groups;
  for (const auto& a : partials) {
    const std::string label = a.label();
    auto& g = groups[label];
    if (g.empty()) order.push_back(label);
    if (std::find(g.begin(), g.end(), a) != g.end()) continue;
    if (g.size() >= max_slots) continue;
    g.push_back(a);
  }
  std::vector<DialogAct> out;
  for (const auto& label : order) {
    for (auto& a : groups[label]) out.push_back(a);
  }
  return out;
}

Policy::Policy(const Schema& schema, const DomainDb& db, RuleTable rules)
    : schema_(schema), db_(db), rules_(std::move(rules)) {}

std::vector<QueryConstraint> Policy::constraints(const DialogState& state, const std::string& domain) const {
  const DomainSchema& ds = schema_.at(domain);
  std::vector<QueryConstraint> out;
  auto it = state.belief_state.find(ds.name);
  if (it == state.belief_state.end()) return out;
  for (const auto& f : ds.db_constraints) {
    auto v = it->second.semi.find(f);
    if (v != it->second.semi.end() && !v->second.empty()) out.push_back({f, v->second});
  }
  return out;
}

const EntityRecord* Policy::selected_entity(const DialogState& state, const std::string& domain) const {
  auto result = db_.query(domain, constraints(state, domain));
  return result.empty() ? nullptr : result.front();
}

SystemAction Policy::decide(const DialogState& state, Rng& rng) const {
  Turn t{state, rng, {}, false, {}};
  for (const auto& a : state.user_action) {
    const std::string dk = domain_key(a.domain);
    const bool known = dk != "general" && schema_.find(dk) && in_domain_list(dk);
    std::vector<const EntityRecord*> db_result;
    if (known) db_result = db_.query(dk, constraints(state, dk));
    if (a.intent == "Request" && dk != "general") {
      if (known) request_policy(t, db_result, dk, a.slot);
    } else if (a.intent == "Inform" && dk != "general") {
      if (known) inform_policy(t, db_result, dk, a.slot);
    } else {
      general_policy(t, dk, a.intent, a.slot);
    }
  }
  SystemAction action;
  action.close_session = t.close;
  if (t.close) return action;
  action.acts = merge_rule(t.acts, rules_.max_slots);
  if (action.acts.empty()) action.acts.push_back({"general", "reqmore", "none", "none"});
  return action;
}

void Policy::request_policy(Turn& t, const std::vector<const EntityRecord*>& db_result, const std::string& domain,
                            const std::string& slot) const {
  const DomainSchema& ds = schema_.at(domain);
  const std::string kind = ds.is_book(schema_.field(slot)) ? "book" : "semi";
  if (const auto* rule = rules_.match(domain, "Request", cardinality_of(db_result.size()), kind)) {
    run(t, *rule, db_result, domain, slot, kind == "book");
  }
}

void Policy::inform_policy(Turn& t, const std::vector<const EntityRecord*>& db_result, const std::string& domain,
                           const std::string& slot) const {
  const DomainSchema& ds = schema_.at(domain);
  const std::string kind = ds.is_book(schema_.field(slot)) ? "book" : "semi";
  if (const auto* rule = rules_.match(domain, "Inform", cardinality_of(db_result.size()), kind)) {
    run(t, *rule, db_result, domain, slot, kind == "book");
  }
}

void Policy::general_policy(Turn& t, const std::string& domain, const std::string& intent,
                            const std::string& slot) const {
  const std::string dk = domain_key(domain);
  const PolicyRule* rule = rules_.match(dk, intent, Cardinality::none, "any");
  if (!rule && dk != "general") rule = rules_.match("general", intent, Cardinality::none, "any");
  if (!rule) rule = rules_.match("general", "*", Cardinality::none, "any");
  if (rule) {
    run(t, *rule, {}, dk, slot, false);
  } else {
    t.acts.push_back({"general", "reqmore", "none", "none"});
  }
}

void Policy::run(Turn& t, const PolicyRule& rule, const std::vector<const EntityRecord*>& db_result,
                 const std::string& domain, const std::string& slot, bool slot_is_book) const {
  const std::string D = act_domain(domain);
  const EntityRecord* entity = db_result.empty() ? nullptr : db_result.front();
  for (const auto& kind : rule.actions) {
    if (kind == "choice") {
      t.acts.push_back({D, "Inform", "Choice", std::to_string(db_result.size())});
    } else if (kind == "recommend") {
      if (!entity) continue;
      const DomainSchema& ds = schema_.at(domain);
      auto it = entity->find(ds.key_field);
      if (it != entity->end()) t.acts.push_back({D, "Recommend", schema_.act_slot(ds.key_field), it->second});
    } else if (kind == "nooffer") {
      auto cs = constraints(t.state, domain);
      if (cs.empty()) t.acts.push_back({D, "NoOffer", "none", "none"});
      for (const auto& c : cs) t.acts.push_back({D, "NoOffer", schema_.act_slot(c.slot), c.value});
    } else if (kind == "book") {
      book(t, db_result, domain, slot_is_book);
    } else if (kind == "taxi") {
      book_taxi(t, domain);
    } else if (kind == "answer") {
      if (!entity && slot != "Ref" && domain != "taxi") {
        auto cs = constraints(t.state, domain);
        if (cs.empty()) t.acts.push_back({D, "NoOffer", "none", "none"});
        for (const auto& c : cs) t.acts.push_back({D, "NoOffer", schema_.act_slot(c.slot), c.value});
        continue;
      }
      t.acts.push_back({D, "Inform", slot, answer(t.state, entity, domain, slot)});
    } else if (kind == "close") {
      t.close = true;
    } else if (kind.rfind("general:", 0) == 0) {
      t.acts.push_back({"general", kind.substr(8), "none", "none"});
    }
  }
}

std::string Policy::answer(const DialogState& state, const EntityRecord* entity, const std::string& domain,
                           const std::string& slot) const {
  auto bit = state.belief_state.find(domain);
  if (bit != state.belief_state.end() && !bit->second.booked.empty()) {
    const auto& last = bit->second.booked.back();
    if (slot == "Ref" && !last.reference.empty()) return last.reference;
    auto d = last.details.find(slot);
    if (d != last.details.end()) return d->second;
  }
  if (entity) {
    auto it = entity->find(schema_.field(slot));
    if (it != entity->end() && !it->second.empty()) return it->second;
  }
  return "unknown";
}

void Policy::book(Turn& t, const std::vector<const EntityRecord*>& db_result, const std::string& domain,
                  bool slot_is_book) const {
  const DomainSchema& ds = schema_.at(domain);
  if (ds.booking_required.empty()) return;
  const std::string D = act_domain(domain);
  if (auto done = t.bookings.find(domain); done != t.bookings.end()) {
    for (const auto& a : done->second) t.acts.push_back(a);
    return;
  }
  const DomainBelief& belief = t.state.belief_state.at(domain);
  std::vector<DialogAct> outcome;
  if (!belief.booked.empty()) {
    // already booked: only repeat the confirmation when the user talks about booking again
    if (slot_is_book) {
      const auto& e = belief.booked.back();
      outcome.push_back({D, "Book", schema_.act_slot(ds.key_field), e.name});
      outcome.push_back({D, "Book", "Ref", e.reference});
    }
  } else {
    BookingResult r = make_booking(ds, belief.book, t.rng);
    if (r.ok && !db_result.empty()) {
      const auto* entity = db_result.front();
      auto key = entity->find(ds.key_field);
      outcome.push_back({D, "Book", schema_.act_slot(ds.key_field), key != entity->end() ? key->second : ""});
      outcome.push_back({D, "Book", "Ref", r.reference});
    } else if (r.ok) {
      outcome.push_back({D, "NoBook", "none", "none"});
    } else if (slot_is_book) {
      for (const auto& m : r.missing) outcome.push_back({D, "Request", schema_.act_slot(m), "?"});
    }
  }
  if (outcome.empty()) return;
  t.bookings[domain] = outcome;
  for (const auto& a : outcome) t.acts.push_back(a);
}

void Policy::book_taxi(Turn& t, const std::string& domain) const {
  const DomainSchema& ds = schema_.at(domain);
  const std::string D = act_domain(domain);
  if (auto done = t.bookings.find(domain); done != t.bookings.end()) {
    for (const auto& a : done->second) t.acts.push_back(a);
    return;
  }
  const DomainBelief& belief = t.state.belief_state.at(domain);
  std::vector<DialogAct> outcome;
  if (!belief.booked.empty()) {
    const auto& e = belief.booked.back();
    for (const auto& [k, v] : e.details) outcome.push_back({D, "Inform", k, v});
  } else {
    const bool ready = std::any_of(ds.booking_any.begin(), ds.booking_any.end(), [&](const std::string& f) {
      auto it = belief.semi.find(f);
      return it != belief.semi.end() && !it->second.empty();
    });
    const auto& cars = db_.records(domain);
    if (ready && !cars.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, cars.size() - 1);
      const auto& car = cars[pick(t.rng)];
      auto it = car.find(ds.key_field);
      outcome.push_back({D, "Inform", schema_.act_slot(ds.key_field), it != car.end() ? it->second : "unknown"});
      outcome.push_back({D, "Inform", "Phone", taxi_phone(t.rng)});
    } else if (!ready && !ds.booking_any.empty()) {
      outcome.push_back({D, "Request", schema_.act_slot(ds.booking_any.front()), "?"});
    } else {
      outcome.push_back({D, "NoOffer", "none", "none"});
    }
  }
  t.bookings[domain] = outcome;
  for (const auto& a : outcome) t.acts.push_back(a);
}

}  // namespace hceds
