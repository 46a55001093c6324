#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hceds {

class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Domain list D in the order the policy iterates it.
extern const std::vector<std::string> kDomainList;

struct DomainSchema {
  std::string name;
  std::string key_field;
  std::vector<std::string> semi;
  std::vector<std::string> book;
  /// Book slots that must all be filled before a reference is issued.
  std::vector<std::string> booking_required;
  /// Alternative trigger: any one of these semi slots completes a booking (taxi).
  std::vector<std::string> booking_any;
  /// Semi slots used as DB filters; defaults to semi.
  std::vector<std::string> db_constraints;
  /// Act slot names the user may ask about.
  std::vector<std::string> requestable;
  std::vector<std::string> numeric;
  /// Yes/no fields: any mention other than "no" or "dontcare" reads as "yes".
  std::vector<std::string> boolean;

  bool is_semi(std::string_view field) const;
  bool is_book(std::string_view field) const;
  bool is_numeric(std::string_view field) const;
  bool is_boolean(std::string_view field) const;
  bool is_requestable(std::string_view act_slot) const;
  bool needs_booking() const { return !booking_required.empty() || !booking_any.empty(); }
};

class Schema {
 public:
  static Schema load(const std::filesystem::path& path);
  static Schema from_json(const nlohmann::json& j);

  const std::vector<DomainSchema>& domains() const { return domains_; }
  /// Case-insensitive; nullptr when absent.
  const DomainSchema* find(std::string_view domain) const;
  const DomainSchema& at(std::string_view domain) const;

  /// Act slot to DB field ("Addr" -> "address"); unmapped slots are lowercased.
  std::string field(std::string_view act_slot) const;
  /// DB field to act slot ("entrance fee" -> "Fee").
  std::string act_slot(std::string_view field) const;
  /// Natural phrase for an act slot ("Post" -> "postcode").
  std::string phrase(std::string_view act_slot) const;

 private:
  std::vector<DomainSchema> domains_;
  std::map<std::string, std::string> slot_fields_;
  std::map<std::string, std::string> field_slots_;
  std::map<std::string, std::string> phrases_;
};

}  // namespace hceds
