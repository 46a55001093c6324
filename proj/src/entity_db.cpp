#include "hceds/entity_db.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <optional>

#include "hceds/acts.hpp"
#include "json.hpp"

namespace hceds {

namespace {

std::optional<double> as_number(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

bool value_matches(const std::string& record_value, const std::string& wanted, bool numeric) {
  if (numeric) {
    auto a = as_number(record_value);
    auto b = as_number(wanted);
    if (a && b) return *a == *b;
  }
  return normalize_value(record_value) == wanted;
}

}  // namespace

std::string normalize_value(std::string_view v) {
  std::size_t b = 0;
  std::size_t e = v.size();
  while (b < e && std::isspace(static_cast<unsigned char>(v[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(v[e - 1]))) --e;
  std::string out(v.substr(b, e - b));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

DomainDb::DomainDb(const Schema& schema) {
  for (const auto& d : schema.domains()) {
    tables_[d.name];
    numeric_[d.name] = d.numeric;
  }
}

DomainDb DomainDb::load(const std::filesystem::path& dir, const Schema& schema) {
  DomainDb db(schema);
  for (const auto& domain : kDomainList) {
    if (!schema.find(domain)) throw DomainError("schema is missing domain '" + domain + "'");
    const auto path = dir / (domain + "_db.json");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing DB file " + path.string());
    const auto j = nlohmann::json::parse(in);
    if (!j.is_array()) throw std::runtime_error(path.string() + ": expected an array of records");
    std::vector<EntityRecord> records;
    records.reserve(j.size());
    for (const auto& item : j) {
      EntityRecord r;
      for (const auto& [k, v] : item.items()) r[k] = v.is_string() ? v.get<std::string>() : v.dump();
      records.push_back(std::move(r));
    }
    db.set_records(domain, std::move(records));
  }
  return db;
}

void DomainDb::set_records(const std::string& domain, std::vector<EntityRecord> records) {
  tables_[domain_key(domain)] = std::move(records);
}

const std::vector<EntityRecord>& DomainDb::records(std::string_view domain) const {
  auto it = tables_.find(domain_key(domain));
  if (it == tables_.end()) throw DomainError("no DB table for domain '" + std::string(domain) + "'");
  return it->second;
}

std::vector<std::string> DomainDb::domains() const {
  std::vector<std::string> out;
  for (const auto& [d, _] : tables_) out.push_back(d);
  return out;
}

std::vector<const EntityRecord*> DomainDb::query(std::string_view domain,
                                                 const std::vector<QueryConstraint>& constraints) const {
  const auto& table = records(domain);
  const auto nit = numeric_.find(domain_key(domain));
  std::vector<std::pair<std::string, std::string>> active;
  std::vector<bool> numeric;
  for (const auto& c : constraints) {
    const std::string v = normalize_value(c.value);
    if (v.empty() || v == "dontcare") continue;
    active.emplace_back(c.slot, v);
    bool is_num = false;
    if (nit != numeric_.end()) {
      for (const auto& f : nit->second) is_num = is_num || f == c.slot;
    }
    numeric.push_back(is_num);
  }
  std::vector<const EntityRecord*> out;
  for (const auto& r : table) {
    bool ok = true;
    for (std::size_t i = 0; i < active.size() && ok; ++i) {
      auto f = r.find(active[i].first);
      ok = f != r.end() && value_matches(f->second, active[i].second, numeric[i]);
    }
    if (ok) out.push_back(&r);
  }
  return out;
}

std::string booking_reference(Rng& rng) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  std::uniform_int_distribution<std::size_t> pick(0, sizeof(kAlphabet) - 2);
  std::string ref(8, ' ');
  for (auto& c : ref) c = kAlphabet[pick(rng)];
  return ref;
}

BookingResult make_booking(const DomainSchema& domain, const std::map<std::string, std::string>& book, Rng& rng) {
  BookingResult r;
  for (const auto& slot : domain.booking_required) {
    auto it = book.find(slot);
    if (it == book.end() || normalize_value(it->second).empty()) r.missing.push_back(slot);
  }
  if (!r.missing.empty() || domain.booking_required.empty()) return r;
  r.ok = true;
  r.reference = booking_reference(rng);
  return r;
}

}  // namespace hceds
