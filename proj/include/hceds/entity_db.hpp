#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hceds/schema.hpp"
#include "hceds/tensor.hpp"

namespace hceds {

/// Field name to value. All values are kept as strings.
using EntityRecord = std::map<std::string, std::string>;

struct QueryConstraint {
  std::string slot;
  std::string value;
};

/// Lowercased and trimmed; the form both sides of a comparison use.
std::string normalize_value(std::string_view v);

class DomainDb {
 public:
  DomainDb() = default;
  explicit DomainDb(const Schema& schema);

  /// Reads <dir>/<domain>_db.json for every domain in D. A missing file is
  /// a startup error; an empty array is a valid, empty table.
  static DomainDb load(const std::filesystem::path& dir, const Schema& schema);

  void set_records(const std::string& domain, std::vector<EntityRecord> records);
  const std::vector<EntityRecord>& records(std::string_view domain) const;
  std::vector<std::string> domains() const;

  /// Records matching every constraint, in file order. "dontcare" and empty
  /// values are skipped; numeric fields compare by value.
  std::vector<const EntityRecord*> query(std::string_view domain, const std::vector<QueryConstraint>& constraints) const;

 private:
  std::map<std::string, std::vector<EntityRecord>> tables_;
  std::map<std::string, std::vector<std::string>> numeric_;
};

struct BookingResult {
  bool ok = false;
  std::string reference;
  std::vector<std::string> missing;
};

/// Eight uppercase alphanumerics.
std::string booking_reference(Rng& rng);

/// Issues a reference when every required book slot of the domain is filled,
/// otherwise refuses with the missing slots (in schema order).
BookingResult make_booking(const DomainSchema& domain, const std::map<std::string, std::string>& book, Rng& rng);

}  // namespace hceds
