#include "hceds/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "hceds/tensor.hpp"

namespace hceds {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool usable(const std::string& v) { return !v.empty() && v != "?" && v != "unknown" && v != "none"; }

/// The single non-general domain of a turn's acts, or "".
std::string sole_domain(const std::vector<DialogAct>& acts) {
  std::string d;
  for (const auto& a : acts) {
    const std::string dk = domain_key(a.domain);
    if (dk == "general") continue;
    if (!d.empty() && d != dk) return "";
    d = dk;
  }
  return d;
}

nlohmann::ordered_json acts_list(const std::vector<DialogAct>& acts) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& a : acts) j.push_back({a.domain, a.intent, a.slot, a.value});
  return j;
}

using PairSet = std::set<std::pair<std::string, std::string>>;

PairSet informed_pairs(const DialogueLog& log, const Schema& schema) {
  PairSet out;
  for (const auto& t : log.turns) {
    for (const auto& a : t.action.acts) {
      if (a.intent != "Inform" && a.intent != "Recommend" && a.intent != "Book") continue;
      if (!usable(a.value)) continue;
      const DomainSchema* ds = schema.find(a.domain);
      if (ds && ds->is_requestable(a.slot)) out.insert({ds->name, a.slot});
    }
  }
  return out;
}

PairSet requested_pairs(const UserGoal& goal) {
  PairSet out;
  for (const auto& d : goal.domains) {
    for (const auto& s : d.requests) out.insert({d.domain, s});
  }
  return out;
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t seed, std::size_t i) { return splitmix64(seed + i); }

double f1_score(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

double compute_return(bool success, double turns, std::size_t max_turns) {
  const double L = static_cast<double>(max_turns);
  return (success ? 2 * L : -L) - turns;
}

double compute_return(const DialogueLog& log, std::size_t max_turns) {
  return compute_return(log.success, static_cast<double>(log.turns.size()), max_turns);
}

std::size_t unanswered_requests(const UserGoal& goal, const std::vector<SystemAction>& actions) {
  std::set<std::pair<std::string, std::string>> answered;
  for (const auto& action : actions) {
    for (const auto& a : action.acts) {
      if ((a.intent == "Inform" || a.intent == "Recommend" || a.intent == "Book") && usable(a.value)) {
        answered.insert({domain_key(a.domain), a.slot});
      }
    }
  }
  std::size_t n = 0;
  for (const auto& d : goal.domains) {
    for (const auto& s : d.requests) n += answered.count({d.domain, s}) ? 0 : 1;
  }
  return n;
}

DialogueLog run_episode(const DialogueSystem& system, const UserGoal& goal, std::uint64_t seed,
                        const EpisodeConfig& config) {
  DialogueLog log;
  log.seed = seed;
  log.goal = goal;
  log.final_goal = goal;
  std::vector<SystemAction> actions;
  try {
    UserSimulator sim(system.schema(), system.db(), goal, splitmix64(seed ^ 0x5157ULL), config.sim);
    Rng system_rng(splitmix64(seed ^ 0x5359ULL));
    Rng realize_rng(splitmix64(seed ^ 0x5245ULL));
    DialogState state = system.initial_state();
    std::string implicit_domain;
    const SystemAction* last = nullptr;
    for (;;) {
      UserSimulator::Step step = sim.step(last);
      if (step.acts.empty()) break;
      RealizeOptions ro;
      ro.implicit_domain = implicit_domain;
      RealizedUtterance u = realize_user_utterance(step.acts, realize_rng, ro);
      implicit_domain = u.context_dependent ? "" : sole_domain(step.acts);

      auto resp = system.respond(state, u.text, system_rng, config.oracle ? &step.acts : nullptr);
      TurnRecord rec;
      rec.gold_acts = step.acts;
      rec.predicted_acts = resp.acts;
      rec.user_utterance = u.text;
      rec.spans = u.spans;
      rec.context_dependent = u.context_dependent;
      rec.state_hash = state_hash(state);
      rec.action = resp.action;
      rec.system_utterance = resp.utterance;
      log.turns.push_back(std::move(rec));
      actions.push_back(resp.action);
      last = &actions.back();
      if (step.done) {
        log.terminated = true;
        break;
      }
      if (state.closed) break;
    }
    log.final_goal = sim.goal();
    log.success = judge_success(log.final_goal, actions, system.schema(), system.db());
  } catch (const std::exception& e) {
    log.error = e.what();
    log.success = false;
  }
  log.unanswered_requests = unanswered_requests(log.final_goal, actions);
  std::set<std::string> booked;
  for (const auto& action : actions) {
    for (const auto& a : action.acts) {
      if ((a.intent == "Book" && a.slot == "Ref") || (domain_key(a.domain) == "taxi" && a.slot == "Car")) {
        booked.insert(domain_key(a.domain));
      }
    }
  }
  log.booked_domains.assign(booked.begin(), booked.end());
  return log;
}

std::vector<DialogueLog> run_episodes(const DialogueSystem& system, std::size_t n, std::uint64_t seed,
                                      const EpisodeConfig& config) {
  if (n == 0) throw ParameterError("run_episodes needs n >= 1");
  std::vector<DialogueLog> logs;
  logs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t s = episode_seed(seed, i);
    Rng goal_rng(s);
    UserGoal goal;
    try {
      goal = sample_goal(system.schema(), system.db(), goal_rng, config.goals);
    } catch (const std::exception& e) {
      DialogueLog failed;
      failed.seed = s;
      failed.error = e.what();
      logs.push_back(std::move(failed));
      continue;
    }
    logs.push_back(run_episode(system, goal, s, config));
  }
  return logs;
}

MetricsReport compute_metrics(const std::vector<DialogueLog>& logs, const Schema& schema, Averaging averaging,
                              std::size_t max_turns) {
  if (logs.empty()) throw ParameterError("compute_metrics needs at least one log");
  MetricsReport r;
  r.episodes = logs.size();
  std::size_t successes = 0, terminated = 0, turns = 0, tp = 0, pred = 0, gold = 0;
  std::size_t need_book = 0, booked = 0;
  double ret = 0, p_sum = 0, r_sum = 0, f_sum = 0;
  std::size_t scored = 0;
  for (const auto& log : logs) {
    successes += log.success ? 1 : 0;
    terminated += log.terminated ? 1 : 0;
    turns += log.turns.size();
    ret += compute_return(log, max_turns);
    r.unanswered_requests += log.unanswered_requests;
    const PairSet informed = informed_pairs(log, schema);
    const PairSet requested = requested_pairs(log.final_goal);
    std::size_t hit = 0;
    for (const auto& p : informed) hit += requested.count(p);
    tp += hit;
    pred += informed.size();
    gold += requested.size();
    if (!informed.empty() || !requested.empty()) {
      const double p = informed.empty() ? 0.0 : static_cast<double>(hit) / informed.size();
      const double rc = requested.empty() ? 0.0 : static_cast<double>(hit) / requested.size();
      p_sum += p;
      r_sum += rc;
      f_sum += f1_score(p, rc);
      ++scored;
    }
    for (const auto& d : log.final_goal.domains) {
      if (d.book.empty()) continue;
      ++need_book;
      if (std::find(log.booked_domains.begin(), log.booked_domains.end(), d.domain) != log.booked_domains.end()) {
        ++booked;
      }
    }
  }
  const double n = static_cast<double>(logs.size());
  r.seed = logs.front().seed;
  r.success_rate = successes / n;
  r.termination_rate = terminated / n;
  r.average_turns = turns / n;
  r.average_return = ret / n;
  if (averaging == Averaging::micro) {
    const Prf m = prf_from_counts(tp, pred, gold);
    r.precision = m.precision;
    r.recall = m.recall;
    r.f1 = m.f1;
  } else if (scored > 0) {
    r.precision = p_sum / scored;
    r.recall = r_sum / scored;
    r.f1 = f_sum / scored;
  }
  if (need_book == 0) {
    r.book_rate = 1.0;
    r.book_rate_vacuous = true;
  } else {
    r.book_rate = static_cast<double>(booked) / need_book;
  }
  return r;
}

std::string format_report(const MetricsReport& r) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "# return = (success ? 2L : -L) - turns, L = max_turns\n"
                "%-16s %10zu\n%-16s %10.4f\n%-16s %10.2f\n%-16s %10.2f\n%-16s %10.4f\n%-16s %10.4f\n"
                "%-16s %10.4f\n%-16s %10.4f%s\n%-16s %10.4f\n%-16s %10zu\n",
                "episodes", r.episodes, "success_rate", r.success_rate, "average_return", r.average_return,
                "average_turns", r.average_turns, "precision", r.precision, "recall", r.recall, "f1", r.f1,
                "book_rate", r.book_rate, r.book_rate_vacuous ? " (no bookings needed)" : "", "termination",
                r.termination_rate, "unanswered", r.unanswered_requests);
  return buf;
}

nlohmann::ordered_json report_to_json(const MetricsReport& r) {
  return {{"return_convention", "(success ? 2L : -L) - turns"},
          {"episodes", r.episodes},
          {"seed", r.seed},
          {"success_rate", r.success_rate},
          {"average_return", r.average_return},
          {"average_turns", r.average_turns},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"book_rate", r.book_rate},
          {"book_rate_vacuous", r.book_rate_vacuous},
          {"termination_rate", r.termination_rate},
          {"unanswered_requests", r.unanswered_requests}};
}

nlohmann::ordered_json log_to_json(const DialogueLog& log) {
  nlohmann::ordered_json j;
  j["seed"] = log.seed;
  j["goal"] = goal_to_json(log.goal);
  j["final_goal"] = goal_to_json(log.final_goal);
  auto& turns = j["turns"] = nlohmann::ordered_json::array();
  for (const auto& t : log.turns) {
    turns.push_back({{"user", t.user_utterance},
                     {"gold_acts", acts_list(t.gold_acts)},
                     {"predicted_acts", acts_list(t.predicted_acts)},
                     {"context_dependent", t.context_dependent},
                     {"state_hash", t.state_hash},
                     {"action", action_to_json(t.action)},
                     {"system", t.system_utterance}});
  }
  j["success"] = log.success;
  j["terminated"] = log.terminated;
  j["booked"] = log.booked_domains;
  j["unanswered_requests"] = log.unanswered_requests;
  if (!log.error.empty()) j["error"] = log.error;
  return j;
}

Prf prf_from_counts(std::size_t tp, std::size_t predicted, std::size_t gold) {
  Prf p;
  p.true_positives = tp;
  p.predicted = predicted;
  p.gold = gold;
  p.precision = predicted ? static_cast<double>(tp) / predicted : 0.0;
  p.recall = gold ? static_cast<double>(tp) / gold : 0.0;
  p.f1 = f1_score(p.precision, p.recall);
  return p;
}

NluScores score_nlu(const std::vector<NluOutcome>& gold, const std::vector<NluOutcome>& predicted) {
  if (gold.size() != predicted.size()) throw ShapeError("score_nlu: gold and predicted sizes differ");
  std::size_t itp = 0, ip = 0, ig = 0, ttp = 0, tp_ = 0, tg = 0, otp = 0, op = 0, og = 0;
  auto count = [](const auto& g, const auto& p, std::size_t& tp, std::size_t& np, std::size_t& ng) {
    ng += g.size();
    np += p.size();
    for (const auto& x : p) tp += g.count(x);
  };
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::set<std::string> gl(gold[i].labels.begin(), gold[i].labels.end());
    std::set<std::string> pl(predicted[i].labels.begin(), predicted[i].labels.end());
    count(gl, pl, itp, ip, ig);
    std::set<std::tuple<std::string, std::size_t, std::size_t>> gs, ps;
    for (const auto& s : gold[i].spans) gs.insert({s.label, s.first_word, s.last_word});
    for (const auto& s : predicted[i].spans) ps.insert({s.label, s.first_word, s.last_word});
    count(gs, ps, ttp, tp_, tg);
    std::set<DialogAct> ga(gold[i].acts.begin(), gold[i].acts.end());
    std::set<DialogAct> pa(predicted[i].acts.begin(), predicted[i].acts.end());
    count(ga, pa, otp, op, og);
  }
  NluScores s;
  s.utterances = gold.size();
  s.intent = prf_from_counts(itp, ip, ig);
  s.tag = prf_from_counts(ttp, tp_, tg);
  s.overall = prf_from_counts(otp, op, og);
  return s;
}

std::string format_nlu_report(const NluScores& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-8s %8s %8s %8s\n%-8s %8.2f %8.2f %8.2f\n%-8s %8.2f %8.2f %8.2f\n%-8s %8.2f %8.2f %8.2f\n", "",
                "R", "P", "F1", "intent", 100 * s.intent.recall, 100 * s.intent.precision, 100 * s.intent.f1, "tag",
                100 * s.tag.recall, 100 * s.tag.precision, 100 * s.tag.f1, "overall", 100 * s.overall.recall,
                100 * s.overall.precision, 100 * s.overall.f1);
  return buf;
}

}  // namespace hceds
