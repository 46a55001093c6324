#include "hceds/pipeline.hpp"

#include <stdexcept>

namespace hceds {

DialogueSystem::DialogueSystem(const Schema& schema, const DomainDb& db, RuleTable rules, TemplateStore templates,
                               const Parser* parser)
    : schema_(schema), db_(db), policy_(schema, db, std::move(rules)), templates_(std::move(templates)),
      parser_(parser) {}

DialogueSystem::Response DialogueSystem::respond(DialogState& state, std::string_view user_utterance, Rng& rng,
                                                 const std::vector<DialogAct>* oracle_acts) const {
  Response r;
  if (oracle_acts) {
    r.acts = *oracle_acts;
  } else {
    if (!parser_) throw std::logic_error("dialogue system has no parser and no oracle acts were given");
    r.acts = parser_->parse(user_utterance, state.history);
  }
  state = update(state, r.acts, user_utterance, schema_, &r.warnings);
  r.action = policy_.decide(state, rng);
  Generation g = generate(r.action, templates_);
  r.utterance = std::move(g.text);
  r.nlg_fallbacks = g.fallbacks;
  state = record_system_turn(state, r.action, r.utterance, schema_);
  return r;
}

std::unique_ptr<Resources> Resources::load(const std::filesystem::path& data_dir,
                                           const std::filesystem::path& template_store) {
  auto r = std::make_unique<Resources>();
  r->schema = Schema::load(data_dir / "schema.json");
  r->db = DomainDb::load(data_dir / "db", r->schema);
  r->rules = RuleTable::load(data_dir / "policy_rules.json");
  r->templates = TemplateStore::defaults(r->schema);
  const auto corpus = data_dir / "nlg_corpus.jsonl";
  if (std::filesystem::exists(corpus)) r->templates.merge(mine_templates(load_nlg_corpus(corpus)));
  if (!template_store.empty()) r->templates.merge(TemplateStore::load(template_store));
  return r;
}

std::filesystem::path default_data_dir() { return HCEDS_DEFAULT_DATA_DIR; }

}  // namespace hceds
