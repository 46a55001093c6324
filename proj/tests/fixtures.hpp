#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hceds/evaluation.hpp"
#include "test_support.hpp"

namespace hceds::testing {

struct World {
  Schema schema;
  DomainDb db;
  RuleTable rules;
  TemplateStore templates;
};

inline const World& world() {
  static const World w = [] {
    World out;
    out.schema = Schema::load(data_dir() + "/schema.json");
    out.db = DomainDb::load(data_dir() + "/db", out.schema);
    out.rules = RuleTable::load(data_dir() + "/policy_rules.json");
    out.templates = TemplateStore::defaults(out.schema);
    out.templates.merge(mine_templates(load_nlg_corpus(data_dir() + "/nlg_corpus.jsonl")));
    return out;
  }();
  return w;
}

using Shape = std::set<std::pair<std::string, std::string>>;

inline Shape shape_of(const std::vector<DialogAct>& acts) {
  Shape s;
  for (const auto& a : acts) s.insert({a.label(), a.slot});
  return s;
}

/// The case-study dialogue: user acts per turn and the expected shape of the
/// system action (empty shape = close session).
struct CaseTurn {
  std::vector<DialogAct> user;
  Shape expected;
};

inline std::vector<CaseTurn> case_study() {
  return {
      {{{"Attraction", "Inform", "Type", "museum"}}, {{"Attraction-Inform", "Choice"}, {"Attraction-Recommend", "Name"}}},
      {{{"Attraction", "Request", "Fee", "?"}, {"Attraction", "Request", "Addr", "?"}},
       {{"Attraction-Inform", "Addr"}, {"Attraction-Inform", "Fee"}}},
      {{{"Hotel", "Inform", "Price", "moderate"}}, {{"Hotel-Inform", "Choice"}, {"Hotel-Recommend", "Name"}}},
      {{{"Attraction", "Request", "Addr", "?"}, {"Hotel", "Request", "Addr", "?"}, {"Hotel", "Request", "Post", "?"}},
       {{"Attraction-Inform", "Addr"}, {"Hotel-Inform", "Addr"}, {"Hotel-Inform", "Post"}}},
      {{{"Hotel", "Request", "Addr", "?"}}, {{"Hotel-Inform", "Addr"}}},
      {{{"Taxi", "Inform", "Leave", "14:30"}}, {{"Taxi-Inform", "Car"}, {"Taxi-Inform", "Phone"}}},
      {{{"general", "thank", "none", "none"}, {"general", "bye", "none", "none"}}, {}},
  };
}

inline UserGoal case_study_goal() {
  UserGoal g;
  g.domains.push_back({"attraction", {{"Type", "museum"}}, {"Fee", "Addr"}, {}});
  g.domains.push_back({"hotel", {{"Price", "moderate"}}, {"Addr", "Post"}, {}});
  g.domains.push_back({"taxi", {{"Leave", "14:30"}}, {"Car", "Phone"}, {}});
  return g;
}

// ---------------------------------------------------------------------------
// Hand-built episode logs for checking compute_metrics against a recount.

inline SystemAction act_list(std::vector<DialogAct> acts) { return SystemAction{std::move(acts), false}; }

inline DialogueLog fixture_log(std::uint64_t seed, UserGoal goal, std::vector<SystemAction> actions, bool success,
                               bool terminated, std::vector<std::string> booked) {
  DialogueLog log;
  log.seed = seed;
  log.goal = goal;
  log.final_goal = goal;
  for (auto& a : actions) {
    TurnRecord t;
    t.action = std::move(a);
    log.turns.push_back(std::move(t));
  }
  log.success = success;
  log.terminated = terminated;
  log.booked_domains = std::move(booked);
  return log;
}

inline std::vector<DialogueLog> metric_fixtures() {
  std::vector<DialogueLog> logs;
  const UserGoal museum{{{"attraction", {{"Type", "museum"}}, {"Addr", "Fee"}, {}}}};
  const UserGoal hotel_book{{{"hotel", {{"Price", "cheap"}}, {"Phone"}, {{"People", "2"}, {"Day", "monday"}, {"Stay", "1"}}}}};
  const UserGoal two{{{"restaurant", {{"Food", "italian"}}, {"Post", "Phone"}, {{"Time", "12:00"}}},
                      {"taxi", {{"Leave", "10:00"}}, {"Car", "Phone"}, {}}}};
  const UserGoal police{{{"police", {}, {"Addr", "Phone", "Post"}, {}}}};
  const UserGoal empty_req{{{"train", {{"Day", "monday"}}, {}, {{"People", "1"}}}}};

  for (std::uint64_t k = 0; k < 5; ++k) {
    // all requests answered, plus an extra unrequested slot
    logs.push_back(fixture_log(
        100 + k, museum,
        {act_list({{"Attraction", "Inform", "Choice", "23"}, {"Attraction", "Recommend", "Name", "broughton house gallery"}}),
         act_list({{"Attraction", "Inform", "Addr", "98 king street"}, {"Attraction", "Inform", "Fee", "free"}}),
         act_list({{"Attraction", "Inform", "Area", "centre"}})},
        true, true, {}));
    // one request answered with "unknown", one never
    logs.push_back(fixture_log(200 + k, museum,
                               {act_list({{"Attraction", "Inform", "Addr", "unknown"}}),
                                act_list({{"general", "reqmore", "none", "none"}})},
                               false, k % 2 == 0, {}));
    // booking made
    logs.push_back(fixture_log(
        300 + k, hotel_book,
        {act_list({{"Hotel", "Recommend", "Name", "alexander bed and breakfast"}}),
         act_list({{"Hotel", "Book", "Name", "alexander bed and breakfast"}, {"Hotel", "Book", "Ref", "AB12CD34"}}),
         act_list({{"Hotel", "Inform", "Phone", "01223525725"}, {"Hotel", "Inform", "Post", "cb12de"}})},
        true, true, {"hotel"}));
    // two domains, taxi done, restaurant booking missing, request answered twice
    logs.push_back(fixture_log(
        400 + k, two,
        {act_list({{"Restaurant", "Inform", "Post", "cb21ab"}, {"Restaurant", "Inform", "Post", "cb21ab"}}),
         act_list({{"Taxi", "Inform", "Car", "ford"}, {"Taxi", "Inform", "Phone", "81234567890"}}),
         act_list({{"Restaurant", "NoBook", "none", "none"}}), act_list({{"Hotel", "Inform", "Addr", "x road"}})},
        false, k != 3, {"taxi"}));
    // request-only domain, partly answered; then a goal without requests
    logs.push_back(fixture_log(500 + k, police,
                               {act_list({{"Police", "Inform", "Addr", "parkside, cambridge"}}),
                                act_list({{"Police", "Inform", "Phone", "?"}})},
                               false, true, {}));
    logs.push_back(fixture_log(600 + k, empty_req, {act_list({{"Train", "Book", "Ref", "ZZ99YY88"}})}, true, true,
                               k < 2 ? std::vector<std::string>{"train"} : std::vector<std::string>{}));
  }
  return logs;
}

/// Recount by plain loops over lists, without the library's helpers.
inline MetricsReport brute_force_metrics(const std::vector<DialogueLog>& logs, const Schema& schema) {
  double succ = 0, term = 0, turns = 0, ret = 0;
  double tp = 0, np = 0, ng = 0, need = 0, booked = 0;
  for (const auto& log : logs) {
    if (log.success) succ += 1;
    if (log.terminated) term += 1;
    turns += static_cast<double>(log.turns.size());
    ret += (log.success ? 80.0 : -40.0) - static_cast<double>(log.turns.size());
    std::vector<std::pair<std::string, std::string>> pred;
    for (const auto& t : log.turns) {
      for (const auto& a : t.action.acts) {
        if (!(a.intent == "Inform" || a.intent == "Recommend" || a.intent == "Book")) continue;
        if (a.value == "?" || a.value == "unknown" || a.value == "none" || a.value.empty()) continue;
        std::string d = a.domain;
        for (auto& c : d) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        bool req = false;
        for (const auto& ds : schema.domains()) {
          if (ds.name != d) continue;
          for (const auto& r : ds.requestable) req = req || r == a.slot;
        }
        if (!req) continue;
        bool dup = false;
        for (const auto& p : pred) dup = dup || (p.first == d && p.second == a.slot);
        if (!dup) pred.push_back({d, a.slot});
      }
    }
    std::vector<std::pair<std::string, std::string>> gold;
    for (const auto& g : log.final_goal.domains) {
      for (const auto& r : g.requests) gold.push_back({g.domain, r});
    }
    for (const auto& p : pred) {
      for (const auto& q : gold) tp += (p == q) ? 1 : 0;
    }
    np += static_cast<double>(pred.size());
    ng += static_cast<double>(gold.size());
    for (const auto& g : log.final_goal.domains) {
      if (g.book.empty()) continue;
      need += 1;
      for (const auto& b : log.booked_domains) booked += (b == g.domain) ? 1 : 0;
    }
  }
  const double n = static_cast<double>(logs.size());
  MetricsReport r;
  r.episodes = logs.size();
  r.success_rate = succ / n;
  r.termination_rate = term / n;
  r.average_turns = turns / n;
  r.average_return = ret / n;
  r.precision = np > 0 ? tp / np : 0;
  r.recall = ng > 0 ? tp / ng : 0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0;
  r.book_rate = need > 0 ? booked / need : 1.0;
  r.book_rate_vacuous = need == 0;
  return r;
}

// ---------------------------------------------------------------------------
// Hand-scored NLU outcomes.

struct NluFixture {
  std::vector<NluOutcome> gold;
  std::vector<NluOutcome> predicted;
};

inline NluOutcome outcome(std::vector<std::string> labels, std::vector<SlotSpan> spans, std::vector<DialogAct> acts) {
  return NluOutcome{std::move(labels), std::move(spans), std::move(acts)};
}

/// 60 utterances built from 6 patterns of agreement and error.
inline NluFixture nlu_fixtures() {
  NluFixture f;
  for (int k = 0; k < 10; ++k) {
    const std::string v = std::to_string(k);
    // exact
    f.gold.push_back(outcome({"Hotel-Inform"}, {{"Hotel-Inform+Price", 4, 4}}, {{"Hotel", "Inform", "Price", "cheap" + v}}));
    f.predicted.push_back(f.gold.back());
    // boundary error
    f.gold.push_back(outcome({"Attraction-Inform"}, {{"Attraction-Inform+Type", 2, 3}},
                             {{"Attraction", "Inform", "Type", "boat " + v}}));
    f.predicted.push_back(outcome({"Attraction-Inform"}, {{"Attraction-Inform+Type", 3, 3}},
                                  {{"Attraction", "Inform", "Type", v}}));
    // missing label and span
    f.gold.push_back(outcome({"Hotel-Inform", "Hotel-Request"},
                             {{"Hotel-Inform+Area", 1, 1}, {"Hotel-Request+Addr", 5, 5}},
                             {{"Hotel", "Inform", "Area", "north"}, {"Hotel", "Request", "Addr", "?"}}));
    f.predicted.push_back(outcome({"Hotel-Inform"}, {{"Hotel-Inform+Area", 1, 1}}, {{"Hotel", "Inform", "Area", "north"}}));
    // spurious label
    f.gold.push_back(outcome({"general-thank"}, {}, {{"general", "thank", "none", "none"}}));
    f.predicted.push_back(outcome({"general-thank", "general-bye"}, {},
                                  {{"general", "thank", "none", "none"}, {"general", "bye", "none", "none"}}));
    // wrong domain, right boundaries
    f.gold.push_back(outcome({"Attraction-Request"}, {{"Attraction-Request+Post", 3, 3}},
                             {{"Attraction", "Request", "Post", "?"}}));
    f.predicted.push_back(outcome({"Hotel-Request"}, {{"Hotel-Request+Post", 3, 3}}, {{"Hotel", "Request", "Post", "?"}}));
    // nothing predicted; duplicate gold span counts once
    f.gold.push_back(outcome({"Train-Inform"}, {{"Train-Inform+Day", 0, 0}, {"Train-Inform+Day", 0, 0}},
                             {{"Train", "Inform", "Day", "monday"}}));
    f.predicted.push_back(outcome({}, {}, {}));
  }
  return f;
}

inline Prf brute_prf(double tp, double np, double ng) {
  Prf p;
  p.precision = np > 0 ? tp / np : 0;
  p.recall = ng > 0 ? tp / ng : 0;
  p.f1 = p.precision + p.recall > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0;
  p.true_positives = static_cast<std::size_t>(tp);
  p.predicted = static_cast<std::size_t>(np);
  p.gold = static_cast<std::size_t>(ng);
  return p;
}

template <class T>
std::vector<T> dedup(const std::vector<T>& v) {
  std::vector<T> out;
  for (const auto& x : v) {
    if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
  }
  return out;
}

inline NluScores brute_force_nlu(const NluFixture& f) {
  double itp = 0, ip = 0, ig = 0, ttp = 0, tp = 0, tg = 0, otp = 0, op = 0, og = 0;
  for (std::size_t i = 0; i < f.gold.size(); ++i) {
    auto gl = dedup(f.gold[i].labels), pl = dedup(f.predicted[i].labels);
    for (const auto& x : pl) itp += std::count(gl.begin(), gl.end(), x);
    ip += pl.size();
    ig += gl.size();
    auto gs = dedup(f.gold[i].spans), ps = dedup(f.predicted[i].spans);
    for (const auto& x : ps) ttp += std::count(gs.begin(), gs.end(), x);
    tp += ps.size();
    tg += gs.size();
    auto ga = dedup(f.gold[i].acts), pa = dedup(f.predicted[i].acts);
    for (const auto& x : pa) otp += std::count(ga.begin(), ga.end(), x);
    op += pa.size();
    og += ga.size();
  }
  NluScores s;
  s.intent = brute_prf(itp, ip, ig);
  s.tag = brute_prf(ttp, tp, tg);
  s.overall = brute_prf(otp, op, og);
  s.utterances = f.gold.size();
  return s;
}

}  // namespace hceds::testing
