#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>

#include "hceds/pipeline.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace hceds {

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BadRequest : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Posting to a session that already said goodbye.
class SessionClosed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServiceConfig {
  std::chrono::seconds idle_timeout{1800};
  /// Seeds the per-session policy rngs; ids stay random regardless.
  std::uint64_t seed = 1;
  /// User turns a session may take before further posts are refused.
  std::size_t max_turns = 40;
  /// When set, every exchange is appended to <dir>/<session id>.jsonl.
  std::filesystem::path transcript_dir;
};

/// Chat sessions over one shared, read-only DialogueSystem. Each session is
/// locked on its own; posts to one session run in arrival order.
class SessionManager {
 public:
  using Clock = std::chrono::steady_clock;

  SessionManager(const DialogueSystem& system, ServiceConfig config = {},
                 std::function<Clock::time_point()> now = Clock::now);

  /// 32 hex digits from std::random_device.
  std::string open();

  /// One pipeline pass: {utterance, action, acts, state}.
  nlohmann::ordered_json post(const std::string& id, const std::string& text);
  /// {id, closed, turns, state, transcript}.
  nlohmann::ordered_json snapshot(const std::string& id) const;

  /// Drops sessions idle for longer than the timeout; returns how many.
  std::size_t expire();
  std::size_t size() const;
  const DialogueSystem& system() const { return system_; }

 private:
  struct Session {
    std::string id;
    DialogState state;
    Rng rng;
    Clock::time_point created_at;
    Clock::time_point last_active;
    std::size_t turns = 0;

    // FIFO ticket lock
    mutable std::mutex mutex;
    std::condition_variable turn_cv;
    std::uint64_t next_ticket = 0;
    std::uint64_t serving = 0;
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  void persist(const Session& s, const nlohmann::ordered_json& record) const;

  const DialogueSystem& system_;
  ServiceConfig config_;
  std::function<Clock::time_point()> now_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t opened_ = 0;
};

/// POST /sessions, POST /sessions/{id}/messages, GET /sessions/{id},
/// GET /healthz. Errors come back as {"error": "..."} with 400/404/409.
void register_routes(httplib::Server& server, SessionManager& sessions);

}  // namespace hceds
