#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "hceds/acts.hpp"
#include "hceds/dialog_state.hpp"
#include "hceds/entity_db.hpp"
#include "hceds/nlg.hpp"
#include "hceds/policy.hpp"
#include "hceds/schema.hpp"

namespace hceds {

/// Anything that turns a user utterance (plus the dialogue so far) into acts.
class Parser {
 public:
  virtual ~Parser() = default;
  virtual std::vector<DialogAct> parse(std::string_view utterance, const std::vector<Turn>& history) const = 0;
};

/// NLU -> state update -> policy -> NLG, one pass per user turn.
class DialogueSystem {
 public:
  /// parser may be null; every respond() call must then pass oracle acts.
  DialogueSystem(const Schema& schema, const DomainDb& db, RuleTable rules, TemplateStore templates,
                 const Parser* parser = nullptr);

  struct Response {
    std::vector<DialogAct> acts;
    SystemAction action;
    std::string utterance;
    std::size_t nlg_fallbacks = 0;
    std::vector<std::string> warnings;
  };

  /// Advances state by one exchange. With oracle_acts the parser is skipped.
  Response respond(DialogState& state, std::string_view user_utterance, Rng& rng,
                   const std::vector<DialogAct>* oracle_acts = nullptr) const;

  DialogState initial_state() const { return init_state(schema_); }
  const Schema& schema() const { return schema_; }
  const DomainDb& db() const { return db_; }
  const Policy& policy() const { return policy_; }
  const TemplateStore& templates() const { return templates_; }
  bool has_parser() const { return parser_ != nullptr; }

 private:
  const Schema& schema_;
  const DomainDb& db_;
  Policy policy_;
  TemplateStore templates_;
  const Parser* parser_;
};

/// Schema, fixture tables, policy rules and templates read from one data
/// directory. Templates are the per-slot defaults plus whatever
/// nlg_corpus.jsonl mines, plus an optional saved store.
struct Resources {
  Schema schema;
  DomainDb db;
  RuleTable rules;
  TemplateStore templates;

  static std::unique_ptr<Resources> load(const std::filesystem::path& data_dir,
                                         const std::filesystem::path& template_store = {});
  Resources() = default;
  Resources(const Resources&) = delete;
  Resources& operator=(const Resources&) = delete;
};

/// Data directory baked in at build time.
std::filesystem::path default_data_dir();

}  // namespace hceds
