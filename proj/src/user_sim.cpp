#include "hceds/user_sim.hpp"

#include <algorithm>
#include <sstream>

namespace hceds {

namespace {

struct UserTemplate {
  const char* label;
  const char* slot;
  const char* text;
  bool needs_context;
};

// {v} is the value, [..] a literal slot mention, {dom} the domain word.
const std::vector<UserTemplate>& user_templates() {
  static const std::vector<UserTemplate> t = {
      {"Attraction-Inform", "Type", "i prefer something related to {v} .", false},
      {"Attraction-Inform", "Type", "i am looking for a {v} attraction .", false},
      {"Attraction-Inform", "Type", "are there any {v} attractions in town ?", false},
      {"Attraction-Inform", "Type", "i would like to visit a {v} attraction .", false},
      {"Attraction-Inform", "Type", "can you recommend a {v} to visit ?", false},
      {"Attraction-Inform", "Area", "i want to find an attraction in the {v} .", false},
      {"Attraction-Inform", "Area", "is there an attraction in the {v} of town ?", false},
      {"Attraction-Inform", "Name", "i am looking for an attraction called {v} .", false},
      {"Attraction-Inform", "Name", "can you tell me about the attraction {v} ?", false},
      {"Attraction-Inform", "Fee", "the attraction should have {v} entrance .", false},
      {"Attraction-Inform", "none", "i am looking for an attraction to visit .", false},

      {"Hotel-Inform", "Price", "how about a hotel in the {v} price range ?", false},
      {"Hotel-Inform", "Price", "i need a {v} hotel .", false},
      {"Hotel-Inform", "Price", "i am looking for a place to stay in the {v} price range .", false},
      {"Hotel-Inform", "Area", "i need a hotel in the {v} .", false},
      {"Hotel-Inform", "Area", "i want to stay at a hotel in the {v} part of town .", false},
      {"Hotel-Inform", "Stars", "i want a hotel with {v} stars .", false},
      {"Hotel-Inform", "Stars", "the hotel should have a star rating of {v} .", false},
      {"Hotel-Inform", "Type", "i am looking for a {v} to stay at .", false},
      {"Hotel-Inform", "Type", "i would prefer to stay at a {v} .", false},
      {"Hotel-Inform", "Parking", "i want free [parking] .", false},
      {"Hotel-Inform", "Parking", "the hotel should include free [parking] .", false},
      {"Hotel-Inform", "Parking", "i need a place to stay with free [parking] .", false},
      {"Hotel-Inform", "Internet", "i need free [wifi] at the hotel .", false},
      {"Hotel-Inform", "Internet", "the hotel should have free [internet] .", false},
      {"Hotel-Inform", "Name", "i am looking for a hotel called {v} .", false},
      {"Hotel-Inform", "Name", "i need information about the hotel {v} .", false},
      {"Hotel-Inform", "People", "i need a room for {v} people .", false},
      {"Hotel-Inform", "People", "please book the hotel for {v} people .", false},
      {"Hotel-Inform", "Day", "we will arrive on {v} .", false},
      {"Hotel-Inform", "Day", "starting on {v} .", false},
      {"Hotel-Inform", "Stay", "we will stay for {v} nights .", false},
      {"Hotel-Inform", "Stay", "for {v} nights please .", false},
      {"Hotel-Inform", "none", "i also need a place to stay .", false},

      {"Restaurant-Inform", "Food", "i want to eat {v} food .", false},
      {"Restaurant-Inform", "Food", "i am looking for a {v} restaurant .", false},
      {"Restaurant-Inform", "Price", "i need a {v} restaurant .", false},
      {"Restaurant-Inform", "Price", "a restaurant in the {v} price range please .", false},
      {"Restaurant-Inform", "Area", "i want a restaurant in the {v} .", false},
      {"Restaurant-Inform", "Name", "i am looking for a restaurant called {v} .", false},
      {"Restaurant-Inform", "Time", "book a table at {v} please .", false},
      {"Restaurant-Inform", "People", "a table for {v} people .", false},
      {"Restaurant-Inform", "Day", "we want to eat on {v} .", false},
      {"Restaurant-Request", "Food", "what [food] do they serve ?", false},
      {"Restaurant-Request", "Price", "what is the [price range] of the restaurant ?", false},

      {"Train-Inform", "Depart", "i need a train from {v} .", false},
      {"Train-Inform", "Depart", "i am leaving from {v} .", false},
      {"Train-Inform", "Dest", "i am going to {v} .", false},
      {"Train-Inform", "Dest", "the train should go to {v} .", false},
      {"Train-Inform", "Day", "i want to travel on {v} .", false},
      {"Train-Inform", "Leave", "the train should leave at {v} .", false},
      {"Train-Inform", "Arrive", "i need to arrive by {v} .", false},
      {"Train-Inform", "People", "i need tickets for {v} people .", false},
      {"Train-Request", "Id", "what is the [train id] ?", false},
      {"Train-Request", "Ticket", "how much is a [ticket] ?", false},
      {"Train-Request", "Duration", "what is the [travel time] ?", false},
      {"Train-Request", "Arrive", "when does the train [arrive] ?", false},
      {"Train-Request", "Leave", "when does the train [leave] ?", false},

      {"Taxi-Inform", "Leave", "okay i also need a taxi that will leave by {v} .", false},
      {"Taxi-Inform", "Leave", "i need a taxi leaving at {v} .", false},
      {"Taxi-Inform", "Arrive", "i need a taxi to arrive by {v} .", false},
      {"Taxi-Inform", "Dest", "the taxi should take me to {v} .", false},
      {"Taxi-Inform", "Depart", "the taxi should pick me up at {v} .", false},
      {"Taxi-Request", "Car", "what [car type] will it be ?", false},
      {"Taxi-Request", "Phone", "what is the taxi 's [contact number] ?", false},

      {"Hospital-Inform", "Department", "i need the {v} department of the hospital .", false},
      {"Police-Inform", "none", "i need to contact the police .", false},
      {"Hospital-Inform", "none", "i am looking for the hospital .", false},

      // shared request phrasings; {dom} names the domain
      {"*-Request", "Addr", "what is the [address] of the {dom} ?", false},
      {"*-Request", "Addr", "can i get the {dom} 's [address] ?", false},
      {"*-Request", "Post", "what is the {dom} 's [postcode] ?", false},
      {"*-Request", "Phone", "what is the [phone number] of the {dom} ?", false},
      {"*-Request", "Area", "which [area] is the {dom} in ?", false},
      {"*-Request", "Type", "what [type] of {dom} is it ?", false},
      {"*-Request", "Ref", "can i get the [reference number] for the {dom} ?", false},
      {"Attraction-Request", "Fee", "what are the [entrance fees] ?", false},
      {"Attraction-Request", "Fee", "how much is the [entrance fee] ?", false},
      {"Hotel-Request", "Price", "what is the [price range] of the hotel ?", false},
      {"Hotel-Request", "Stars", "how many [stars] does the hotel have ?", false},
      {"Hotel-Request", "Internet", "does the hotel have [internet] ?", false},
      {"Hotel-Request", "Parking", "does the hotel have [parking] ?", false},

      // phrasings that leave the domain to the dialogue context
      {"*-Request", "Addr", "what is the [address] ?", true},
      {"*-Request", "Addr", "can i get the [address] please ?", true},
      {"*-Request", "Addr", "i just need the [address] .", true},
      {"*-Request", "Post", "what is the [postcode] ?", true},
      {"*-Request", "Post", "can you give me the [postcode] ?", true},
      {"*-Request", "Phone", "could i have the [phone number] ?", true},
      {"*-Request", "Phone", "what is their [phone number] ?", true},
      {"*-Request", "Area", "what [area] is it in ?", true},
      {"*-Inform", "Area", "it should be in the {v} .", true},
      {"*-Inform", "Area", "i would like it to be in the {v} please .", true},
      {"*-Inform", "Area", "somewhere in the {v} would be good .", true},
      {"*-Inform", "Name", "i am interested in {v} .", true},

      {"general-greet", "none", "hello , i need some help .", false},
      {"general-thank", "none", "thanks .", false},
      {"general-thank", "none", "thank you .", false},
      {"general-bye", "none", "goodbye .", false},
  };
  return t;
}

const std::vector<const char*>& closing_templates() {
  static const std::vector<const char*> t = {"that 's all i need today . thanks ! bye !",
                                              "thank you for your help , goodbye .", "thanks , that is all . bye ."};
  return t;
}

bool template_matches(const UserTemplate& t, const DialogAct& a) {
  if (t.slot != a.slot) return false;
  const std::string label = a.label();
  if (label == t.label) return true;
  const std::string tl = t.label;
  return tl.rfind("*-", 0) == 0 && a.domain != "general" && tl.substr(2) == a.intent;
}

std::vector<std::string> words_of(const std::string& s) { return split_words(normalize(s)); }

/// Renders one template; appends words and at most one span.
void render(const std::string& text, const DialogAct& a, std::vector<std::string>& words, std::vector<SlotSpan>& spans) {
  const std::string span_label = a.label() + "+" + a.slot;
  std::istringstream in(text);
  std::string tok;
  bool in_literal = false;
  std::size_t literal_start = 0;
  while (in >> tok) {
    if (tok == "{v}") {
      auto v = words_of(a.value);
      const std::size_t first = words.size();
      words.insert(words.end(), v.begin(), v.end());
      if (!v.empty()) spans.push_back({span_label, first, words.size() - 1});
    } else if (tok == "{dom}") {
      words.push_back(domain_key(a.domain));
    } else if (tok.size() > 1 && tok.front() == '[') {
      in_literal = true;
      literal_start = words.size();
      tok.erase(0, 1);
      if (tok.back() == ']') {
        tok.pop_back();
        words.push_back(tok);
        spans.push_back({span_label, literal_start, words.size() - 1});
        in_literal = false;
      } else {
        words.push_back(tok);
      }
    } else if (in_literal && tok.back() == ']') {
      tok.pop_back();
      words.push_back(tok);
      spans.push_back({span_label, literal_start, words.size() - 1});
      in_literal = false;
    } else {
      words.push_back(tok);
    }
  }
}

std::string field_value(const EntityRecord& r, const std::string& field) {
  auto it = r.find(field);
  return it == r.end() ? "" : it->second;
}

std::string random_time(Rng& rng) {
  std::uniform_int_distribution<int> h(7, 22);
  std::uniform_int_distribution<int> m(0, 3);
  const int hh = h(rng);
  const int mm = m(rng) * 15;
  std::string s = (hh < 10 ? "0" : "") + std::to_string(hh) + ":" + (mm < 10 ? "0" : "") + std::to_string(mm);
  return s;
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

}  // namespace

const DomainGoal* UserGoal::find(const std::string& domain) const {
  for (const auto& d : domains) {
    if (d.domain == domain_key(domain)) return &d;
  }
  return nullptr;
}

DomainGoal* UserGoal::find(const std::string& domain) {
  return const_cast<DomainGoal*>(static_cast<const UserGoal*>(this)->find(domain));
}

nlohmann::ordered_json goal_to_json(const UserGoal& g) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& d : g.domains) {
    nlohmann::ordered_json item;
    item["domain"] = d.domain;
    item["constraints"] = nlohmann::ordered_json::array();
    for (const auto& [s, v] : d.constraints) item["constraints"].push_back({s, v});
    item["requests"] = d.requests;
    item["book"] = nlohmann::ordered_json::array();
    for (const auto& [s, v] : d.book) item["book"].push_back({s, v});
    j.push_back(item);
  }
  return j;
}

UserGoal goal_from_json(const nlohmann::ordered_json& j) {
  UserGoal g;
  for (const auto& item : j) {
    DomainGoal d;
    d.domain = item.at("domain").get<std::string>();
    for (const auto& p : item.at("constraints")) d.constraints.emplace_back(p.at(0), p.at(1));
    d.requests = item.at("requests").get<std::vector<std::string>>();
    for (const auto& p : item.at("book")) d.book.emplace_back(p.at(0), p.at(1));
    g.domains.push_back(std::move(d));
  }
  return g;
}

UserGoal sample_goal(const Schema& schema, const DomainDb& db, Rng& rng, const GoalConfig& config) {
  std::vector<std::string> pool;
  for (const auto& d : config.domains) {
    if (schema.find(d)) pool.push_back(domain_key(d));
  }
  if (pool.empty()) throw DomainError("goal config names no known domain");
  std::uniform_int_distribution<std::size_t> count(config.min_domains, std::min(config.max_domains, pool.size()));
  const std::size_t n = count(rng);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(n);
  // taxi trips make sense after the places they connect
  std::stable_partition(pool.begin(), pool.end(), [](const std::string& d) { return d != "taxi"; });

  const std::vector<std::string> days = {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"};
  UserGoal goal;
  for (const auto& dk : pool) {
    const DomainSchema& ds = schema.at(dk);
    DomainGoal g;
    g.domain = dk;
    const auto& records = db.records(dk);
    std::vector<std::string> req_pool;
    for (const auto& r : ds.requestable) {
      if (r != "Ref") req_pool.push_back(r);
    }
    if (dk == "taxi") {
      std::vector<std::string> places = {"the train station", "the hospital", "the city centre"};
      for (const auto& other : {"attraction", "hotel", "restaurant"}) {
        for (const auto& r : db.records(other)) places.push_back(field_value(r, "name"));
      }
      g.constraints.emplace_back("Dest", pick(places, rng));
      g.constraints.emplace_back("Depart", pick(places, rng));
      g.constraints.emplace_back(chance(rng, 0.7) ? "Leave" : "Arrive", random_time(rng));
      g.requests = {"Car", "Phone"};
      goal.domains.push_back(std::move(g));
      continue;
    }
    if (records.empty()) continue;
    const EntityRecord& r = pick(records, rng);
    std::vector<std::string> fields;
    if (dk == "attraction") {
      fields = {"type"};
      if (chance(rng, 0.4)) fields.push_back("area");
    } else if (dk == "hotel") {
      std::vector<std::string> opt = {"pricerange", "area", "stars", "type", "parking", "internet"};
      std::shuffle(opt.begin(), opt.end(), rng);
      std::uniform_int_distribution<std::size_t> k(1, 3);
      for (std::size_t i = 0, m = k(rng); i < m; ++i) {
        if ((opt[i] == "parking" || opt[i] == "internet") && field_value(r, opt[i]) != "yes") continue;
        fields.push_back(opt[i]);
      }
      if (fields.empty()) fields.push_back("pricerange");
    } else if (dk == "restaurant") {
      fields = {"food", "pricerange"};
      if (chance(rng, 0.5)) fields.push_back("area");
    } else if (dk == "train") {
      fields = {"departure", "destination", "day"};
      if (chance(rng, 0.5)) fields.push_back("leaveAt");
    } else if (dk == "hospital") {
      if (chance(rng, 0.5)) fields.push_back("department");
    }
    for (const auto& f : fields) g.constraints.emplace_back(schema.act_slot(f), field_value(r, f));
    // requests: never ask about something already constrained
    std::vector<std::string> avail;
    for (const auto& s : req_pool) {
      const bool constrained = std::any_of(g.constraints.begin(), g.constraints.end(),
                                          [&](const SlotValue& c) { return c.first == s; });
      if (!constrained) avail.push_back(s);
    }
    std::shuffle(avail.begin(), avail.end(), rng);
    const bool books = !ds.booking_required.empty() && chance(rng, config.booking_probability);
    std::uniform_int_distribution<std::size_t> nreq(books ? 0 : 1, std::min<std::size_t>(3, avail.size()));
    const std::size_t k = avail.empty() ? 0 : nreq(rng);
    g.requests.assign(avail.begin(), avail.begin() + static_cast<std::ptrdiff_t>(k));
    if (books) {
      std::uniform_int_distribution<int> people(1, 8);
      std::uniform_int_distribution<int> stay(1, 5);
      for (const auto& f : ds.booking_required) {
        std::string v;
        if (f == "people") v = std::to_string(people(rng));
        if (f == "day") v = pick(days, rng);
        if (f == "stay") v = std::to_string(stay(rng));
        if (f == "time") v = random_time(rng);
        g.book.emplace_back(schema.act_slot(f), v);
      }
    }
    if (g.constraints.empty() && g.requests.empty() && g.book.empty()) continue;
    goal.domains.push_back(std::move(g));
  }
  if (goal.domains.empty()) {
    GoalConfig fallback = config;
    fallback.domains = {"attraction"};
    return sample_goal(schema, db, rng, fallback);
  }
  return goal;
}

UserSimulator::UserSimulator(const Schema& schema, const DomainDb& db, UserGoal goal, std::uint64_t seed,
                             SimConfig config)
    : schema_(schema), db_(db), goal_(std::move(goal)), rng_(seed), config_(config) {
  std::vector<AgendaItem> order;
  for (const auto& d : goal_.domains) {
    const std::string D = act_domain(d.domain);
    for (const auto& [s, v] : d.constraints) order.push_back({d.domain, AgendaItem::Kind::inform, {{D, "Inform", s, v}}});
    if (d.constraints.empty() && !d.requests.empty() && d.book.empty()) {
      // nothing to inform: the first request opens the domain
    }
    for (const auto& s : d.requests) order.push_back({d.domain, AgendaItem::Kind::request, {{D, "Request", s, "?"}}});
    if (!d.book.empty()) {
      AgendaItem b{d.domain, AgendaItem::Kind::book, {}};
      for (const auto& [s, v] : d.book) b.acts.push_back({D, "Inform", s, v});
      order.push_back(std::move(b));
    }
  }
  agenda_.assign(order.rbegin(), order.rend());
}

bool UserSimulator::request_open(const std::string& domain, const std::string& slot) const {
  const DomainGoal* g = goal_.find(domain);
  if (!g || std::find(g->requests.begin(), g->requests.end(), slot) == g->requests.end()) return false;
  auto it = answered_.find(domain);
  return it == answered_.end() || !it->second.count(slot);
}

void UserSimulator::push_inform(const std::string& domain, const std::string& slot, const std::string& value) {
  DialogAct a{act_domain(domain), "Inform", slot, value};
  if (!agenda_.empty() && agenda_.back().acts.size() == 1 && agenda_.back().acts[0] == a) return;
  agenda_.push_back({domain, AgendaItem::Kind::inform, {a}});
}

void UserSimulator::relax(const std::string& domain, const std::vector<std::string>& slots) {
  DomainGoal* g = goal_.find(domain);
  if (!g) return;
  for (const auto& slot : slots) {
    auto c = std::find_if(g->constraints.begin(), g->constraints.end(), [&](const SlotValue& sv) { return sv.first == slot; });
    if (c == g->constraints.end() || c->second == "dontcare") continue;
    const int n = ++nooffers_[{domain, slot}];
    std::string replacement = "dontcare";
    if (n == 1 && domain != "taxi") {
      // alternative value that still has matches under the other constraints
      const std::string field = schema_.field(slot);
      std::vector<QueryConstraint> others;
      for (const auto& [s, v] : g->constraints) {
        if (s != slot) others.push_back({schema_.field(s), v});
      }
      std::vector<std::string> alternatives;
      for (const auto* r : db_.query(domain, others)) {
        auto it = r->find(field);
        if (it != r->end() && normalize_value(it->second) != normalize_value(c->second) &&
            std::find(alternatives.begin(), alternatives.end(), it->second) == alternatives.end()) {
          alternatives.push_back(it->second);
        }
      }
      if (!alternatives.empty()) replacement = pick(alternatives, rng_);
    }
    c->second = replacement;
    push_inform(domain, slot, replacement);
    return;
  }
}

void UserSimulator::react(const SystemAction& action) {
  std::map<std::string, std::vector<std::string>> nooffer;
  for (const auto& a : action.acts) {
    const std::string dk = domain_key(a.domain);
    if (a.intent == "Inform" || a.intent == "Recommend" || a.intent == "Book") {
      if (a.value != "?" && a.value != "unknown" && a.value != "none" && request_open(dk, a.slot)) {
        answered_[dk].insert(a.slot);
        agenda_.erase(std::remove_if(agenda_.begin(), agenda_.end(),
                                     [&](const AgendaItem& it) {
                                       return it.domain == dk && it.kind == AgendaItem::Kind::request &&
                                              it.acts[0].slot == a.slot;
                                     }),
                      agenda_.end());
      }
      if ((a.intent == "Book" && a.slot == "Ref") || (dk == "taxi" && a.slot == "Car")) {
        booked_.insert(dk);
        agenda_.erase(std::remove_if(agenda_.begin(), agenda_.end(),
                                     [&](const AgendaItem& it) {
                                       return it.domain == dk && it.kind == AgendaItem::Kind::book;
                                     }),
                      agenda_.end());
      }
    } else if (a.intent == "NoOffer") {
      nooffer[dk].push_back(a.slot);
    } else if (a.intent == "Request") {
      const DomainGoal* g = goal_.find(dk);
      if (!g) continue;
      for (const auto* list : {&g->constraints, &g->book}) {
        for (const auto& [s, v] : *list) {
          if (s == a.slot) push_inform(dk, s, v);
        }
      }
    }
  }
  for (const auto& [dk, slots] : nooffer) relax(dk, slots);
  // requests and bookings popped last turn but not satisfied go back on the agenda
  for (auto it = last_popped_.rbegin(); it != last_popped_.rend(); ++it) {
    if (it->kind == AgendaItem::Kind::request && request_open(it->domain, it->acts[0].slot)) {
      agenda_.push_back(*it);
    } else if (it->kind == AgendaItem::Kind::book && !booked_.count(it->domain) && book_retries_[it->domain]++ < 2) {
      agenda_.push_back(*it);
    }
  }
  last_popped_.clear();
}

AgendaItem UserSimulator::pop() {
  AgendaItem top = std::move(agenda_.back());
  agenda_.pop_back();
  return top;
}

UserSimulator::Step UserSimulator::step(const SystemAction* system_action) {
  Step out;
  if (finished_) {
    out.done = true;
    return out;
  }
  if (system_action) react(*system_action);
  if (turns_ >= config_.max_turns) {
    hit_limit_ = true;
    finished_ = true;
    out.done = true;
    return out;
  }
  ++turns_;
  if (agenda_.empty()) {
    out.acts = {{"general", "thank", "none", "none"}, {"general", "bye", "none", "none"}};
    out.done = true;
    finished_ = true;
    return out;
  }
  AgendaItem first = pop();
  std::vector<AgendaItem> taken;
  taken.push_back(std::move(first));
  if (!agenda_.empty() && agenda_.back().domain == taken[0].domain) {
    const bool same_kind = agenda_.back().kind == taken[0].kind;
    if (same_kind || chance(rng_, config_.mixed_pop_probability)) taken.push_back(pop());
  }
  const std::string domain = taken[0].domain;
  if (!last_domain_.empty() && domain != last_domain_ && chance(rng_, config_.thank_on_switch_probability)) {
    out.acts.push_back({"general", "thank", "none", "none"});
  }
  last_domain_ = domain;
  for (const auto& item : taken) {
    for (const auto& a : item.acts) out.acts.push_back(a);
  }
  last_popped_ = std::move(taken);
  return out;
}

RealizedUtterance realize_user_utterance(const std::vector<DialogAct>& acts, Rng& rng, const RealizeOptions& options) {
  RealizedUtterance out;
  out.acts = acts;
  std::vector<std::string> words;
  const bool closing = acts.size() == 2 && acts[0].label() == "general-thank" && acts[1].label() == "general-bye";
  if (closing) {
    for (auto& w : words_of(pick(closing_templates(), rng))) words.push_back(w);
  } else {
    for (const auto& a : acts) {
      const std::string dk = domain_key(a.domain);
      if (a.value == "dontcare") {
        DialogAct any = a;
        any.value = "any";
        render("i do n't mind , {v} " + domain_key(a.slot) + " is fine .", any, words, out.spans);
        continue;
      }
      std::vector<const UserTemplate*> explicit_t;
      std::vector<const UserTemplate*> context_t;
      for (const auto& t : user_templates()) {
        if (!template_matches(t, a)) continue;
        (t.needs_context ? context_t : explicit_t).push_back(&t);
      }
      const UserTemplate* chosen = nullptr;
      const bool implicit_ok = !options.implicit_domain.empty() && options.implicit_domain == dk && !context_t.empty();
      if (implicit_ok && (explicit_t.empty() || chance(rng, 0.5))) {
        chosen = pick(context_t, rng);
        out.context_dependent = true;
      } else if (!explicit_t.empty()) {
        chosen = pick(explicit_t, rng);
      }
      if (chosen) {
        render(chosen->text, a, words, out.spans);
      } else if (a.intent == "Request") {
        render("what is the [" + domain_key(a.slot) + "] of the {dom} ?", a, words, out.spans);
      } else {
        render("i want {v} " + domain_key(a.slot) + " .", a, words, out.spans);
      }
    }
  }
  for (const auto& w : words) {
    if (!out.text.empty()) out.text += ' ';
    out.text += w;
  }
  return out;
}

bool judge_success(const UserGoal& goal, const std::vector<SystemAction>& system_actions, const Schema& schema,
                   const DomainDb& db) {
  std::map<std::string, std::map<std::string, std::string>> informed;
  std::map<std::string, std::string> booked_name;
  std::set<std::string> booked;
  for (const auto& action : system_actions) {
    for (const auto& a : action.acts) {
      const std::string dk = domain_key(a.domain);
      if (a.intent == "Inform" || a.intent == "Recommend") informed[dk][a.slot] = a.value;
      if (a.intent == "Book" && a.slot == "Ref" && !a.value.empty()) booked.insert(dk);
      if (a.intent == "Book" && a.slot != "Ref") booked_name[dk] = a.value;
      if (dk == "taxi" && a.intent == "Inform" && a.slot == "Car") booked.insert(dk);
    }
  }
  auto answered = [](const std::map<std::string, std::string>& m, const std::string& slot) {
    auto it = m.find(slot);
    return it != m.end() && !it->second.empty() && it->second != "unknown" && it->second != "?";
  };
  for (const auto& g : goal.domains) {
    const DomainSchema& ds = schema.at(g.domain);
    const auto& info = informed[g.domain];
    for (const auto& s : g.requests) {
      if (!answered(info, s)) return false;
    }
    if (g.domain == "taxi") {
      if (!booked.count("taxi")) return false;
      const auto& cars = db.records("taxi");
      const std::string car = info.count("Car") ? normalize_value(info.at("Car")) : "";
      const bool real_car = std::any_of(cars.begin(), cars.end(), [&](const EntityRecord& r) {
        return normalize_value(field_value(r, ds.key_field)) == car;
      });
      if (!real_car) return false;
      continue;
    }
    std::vector<QueryConstraint> cs;
    for (const auto& [s, v] : g.constraints) cs.push_back({schema.field(s), v});
    const auto candidates = db.query(g.domain, cs);
    const bool consistent = std::any_of(candidates.begin(), candidates.end(), [&](const EntityRecord* e) {
      for (const auto& s : g.requests) {
        if (normalize_value(field_value(*e, schema.field(s))) != normalize_value(info.at(s))) return false;
      }
      auto bn = booked_name.find(g.domain);
      if (!g.book.empty() && bn != booked_name.end() &&
          normalize_value(field_value(*e, ds.key_field)) != normalize_value(bn->second)) {
        return false;
      }
      return true;
    });
    if (!consistent) return false;
    if (!g.book.empty() && !booked.count(g.domain)) return false;
  }
  return true;
}

}  // namespace hceds
