#include "hceds/schema.hpp"

#include <algorithm>
#include <fstream>

#include "hceds/acts.hpp"

namespace hceds {

const std::vector<std::string> kDomainList = {"hotel", "restaurant", "police", "taxi", "attraction", "hospital", "train"};

namespace {

bool contains(const std::vector<std::string>& v, std::string_view s) { return std::find(v.begin(), v.end(), s) != v.end(); }

std::vector<std::string> strings(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

}  // namespace

bool DomainSchema::is_semi(std::string_view f) const { return contains(semi, f); }
bool DomainSchema::is_book(std::string_view f) const { return contains(book, f); }
bool DomainSchema::is_numeric(std::string_view f) const { return contains(numeric, f); }
bool DomainSchema::is_boolean(std::string_view f) const { return contains(boolean, f); }
bool DomainSchema::is_requestable(std::string_view s) const { return contains(requestable, s); }

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema " + path.string());
  return from_json(nlohmann::json::parse(in));
}

Schema Schema::from_json(const nlohmann::json& j) {
  Schema s;
  const auto& domains = j.at("domains");
  if (!domains.is_object() || domains.empty()) throw DomainError("schema declares no domains");
  // keep D's order first, then anything extra
  std::vector<std::string> names;
  for (const auto& d : kDomainList) {
    if (domains.contains(d)) names.push_back(d);
  }
  for (const auto& [name, _] : domains.items()) {
    if (!contains(names, name)) names.push_back(name);
  }
  for (const auto& name : names) {
    const auto& d = domains.at(name);
    DomainSchema ds;
    ds.name = name;
    ds.key_field = d.value("key", "name");
    ds.semi = strings(d, "semi");
    ds.book = strings(d, "book");
    ds.booking_required = strings(d, "booking_required");
    ds.booking_any = strings(d, "booking_any");
    ds.db_constraints = d.contains("db_constraints") ? strings(d, "db_constraints") : ds.semi;
    ds.requestable = strings(d, "requestable");
    ds.numeric = strings(d, "numeric");
    ds.boolean = strings(d, "boolean");
    s.domains_.push_back(std::move(ds));
  }
  if (j.contains("slot_fields")) {
    for (const auto& [slot, field] : j.at("slot_fields").items()) {
      s.slot_fields_[slot] = field.get<std::string>();
      s.field_slots_.emplace(field.get<std::string>(), slot);
    }
  }
  if (j.contains("slot_phrases")) {
    for (const auto& [slot, phrase] : j.at("slot_phrases").items()) s.phrases_[slot] = phrase.get<std::string>();
  }
  return s;
}

const DomainSchema* Schema::find(std::string_view domain) const {
  const std::string key = domain_key(domain);
  for (const auto& d : domains_) {
    if (d.name == key) return &d;
  }
  return nullptr;
}

const DomainSchema& Schema::at(std::string_view domain) const {
  if (const auto* d = find(domain)) return *d;
  throw DomainError("unknown domain '" + std::string(domain) + "'");
}

std::string Schema::field(std::string_view act_slot) const {
  auto it = slot_fields_.find(std::string(act_slot));
  return it != slot_fields_.end() ? it->second : domain_key(act_slot);
}

std::string Schema::act_slot(std::string_view field) const {
  auto it = field_slots_.find(std::string(field));
  if (it != field_slots_.end()) return it->second;
  return act_domain(field);
}

std::string Schema::phrase(std::string_view act_slot) const {
  auto it = phrases_.find(std::string(act_slot));
  return it != phrases_.end() ? it->second : field(act_slot);
}

}  // namespace hceds
