#include "hceds/service.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include "hceds/evaluation.hpp"
#include "httplib.h"

namespace hceds {

using nlohmann::ordered_json;

SessionManager::SessionManager(const DialogueSystem& system, ServiceConfig config,
                               std::function<Clock::time_point()> now)
    : system_(system), config_(std::move(config)), now_(std::move(now)) {
  if (!config_.transcript_dir.empty()) std::filesystem::create_directories(config_.transcript_dir);
}

std::string SessionManager::open() {
  static thread_local std::random_device device;
  auto s = std::make_shared<Session>();
  char buf[33];
  std::unique_lock lock(map_mutex_);
  do {
    std::uint32_t words[4];
    for (auto& w : words) w = device();
    std::snprintf(buf, sizeof buf, "%08x%08x%08x%08x", words[0], words[1], words[2], words[3]);
  } while (sessions_.count(buf));
  s->id = buf;
  s->state = system_.initial_state();
  s->rng.seed(episode_seed(config_.seed, opened_++));
  s->created_at = s->last_active = now_();
  sessions_[s->id] = s;
  return s->id;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
  std::lock_guard guard(it->second->mutex);
  if (now_() - it->second->last_active > config_.idle_timeout) throw NotFound("session '" + id + "' expired");
  return it->second;
}

ordered_json SessionManager::post(const std::string& id, const std::string& text) {
  if (normalize(text).empty()) throw BadRequest("message text is empty");
  std::shared_ptr<Session> s = find(id);
  std::unique_lock lock(s->mutex);
  const std::uint64_t ticket = s->next_ticket++;
  s->turn_cv.wait(lock, [&] { return s->serving == ticket; });
  struct Release {
    Session& s;
    ~Release() {
      ++s.serving;
      s.turn_cv.notify_all();
    }
  } release{*s};

  if (s->state.closed) throw SessionClosed("session '" + id + "' is closed");
  if (s->turns >= config_.max_turns) throw SessionClosed("session '" + id + "' reached its turn limit");
  DialogueSystem::Response r = system_.respond(s->state, text, s->rng);
  s->last_active = now_();
  ++s->turns;
  ordered_json out = {{"utterance", r.utterance},
                      {"action", action_to_json(r.action)},
                      {"acts", acts_to_json(r.acts)},
                      {"state", state_to_json(s->state)}};
  if (!r.warnings.empty()) out["warnings"] = r.warnings;
  persist(*s, {{"turn", s->turns}, {"user", text}, {"acts", out["acts"]}, {"action", out["action"]},
               {"system", r.utterance}});
  return out;
}

void SessionManager::persist(const Session& s, const ordered_json& record) const {
  if (config_.transcript_dir.empty()) return;
  std::ofstream out(config_.transcript_dir / (s.id + ".jsonl"), std::ios::app);
  out << record.dump() << '\n';
}

ordered_json SessionManager::snapshot(const std::string& id) const {
  std::shared_ptr<Session> s = find(id);
  std::lock_guard lock(s->mutex);
  ordered_json transcript = ordered_json::array();
  for (const auto& t : s->state.history) transcript.push_back({{"speaker", t.speaker}, {"text", t.text}});
  return {{"id", s->id},
          {"closed", s->state.closed},
          {"turns", s->turns},
          {"state", state_to_json(s->state)},
          {"transcript", transcript}};
}

std::size_t SessionManager::expire() {
  std::unique_lock lock(map_mutex_);
  const auto now = now_();
  std::size_t n = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    bool stale;
    {
      std::lock_guard guard(it->second->mutex);
      stale = now - it->second->last_active > config_.idle_timeout;
    }
    if (stale) {
      it = sessions_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::size_t SessionManager::size() const {
  std::shared_lock lock(map_mutex_);
  return sessions_.size();
}

namespace {

void reply(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const NotFound& e) {
    reply(res, 404, {{"error", e.what()}});
  } catch (const BadRequest& e) {
    reply(res, 400, {{"error", e.what()}});
  } catch (const SessionClosed& e) {
    reply(res, 409, {{"error", e.what()}});
  } catch (const nlohmann::json::exception& e) {
    reply(res, 400, {{"error", std::string("malformed request body: ") + e.what()}});
  } catch (const std::exception& e) {
    reply(res, 500, {{"error", e.what()}});
  }
}

}  // namespace

void register_routes(httplib::Server& server, SessionManager& sessions) {
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
  server.Post("/sessions", [&sessions](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      sessions.expire();
      reply(res, 201, {{"id", sessions.open()}});
    });
  });
  server.Post(R"(/sessions/([0-9a-f]+)/messages)", [&sessions](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const ordered_json body = ordered_json::parse(req.body);
      if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
        throw BadRequest("body must be an object with a string 'text'");
      }
      reply(res, 200, sessions.post(req.matches[1], body["text"].get<std::string>()));
    });
  });
  server.Get(R"(/sessions/([0-9a-f]+))", [&sessions](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, sessions.snapshot(req.matches[1])); });
  });
}

}  // namespace hceds
