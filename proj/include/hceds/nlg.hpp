#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hceds/acts.hpp"
#include "hceds/schema.hpp"

namespace hceds {

class TemplateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// (domain-intent, slot), e.g. ("Attraction-Inform", "Phone").
using SignaturePair = std::pair<std::string, std::string>;
/// Sorted, duplicate-free.
using Signature = std::vector<SignaturePair>;

/// "{Attraction-Inform.Phone}"
std::string placeholder(const SignaturePair& p);

struct Template {
  Signature signature;
  std::string text;
  std::size_t source_count = 0;
};

class TemplateStore {
 public:
  /// Single-slot templates for every (domain-intent, slot) the policy can
  /// emit for the schema's domains, plus the general acts.
  static TemplateStore defaults(const Schema& schema);
  static TemplateStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Adds count occurrences of (signature, text).
  void add(const Signature& sig, const std::string& text, std::size_t count = 1);
  /// Folds every template of other into this store.
  void merge(const TemplateStore& other);

  /// Highest count, then shorter text, then lexicographic. nullptr if none.
  const Template* best(const Signature& sig) const;
  std::vector<Template> all() const;
  std::size_t size() const { return index_.size(); }

 private:
  void reindex(const Signature& sig);

  std::map<Signature, std::map<std::string, std::size_t>> counts_;
  std::map<Signature, Template> index_;
};

struct MiningReport {
  std::size_t mined = 0;
  std::size_t skipped = 0;
};

/// Delexicalises each utterance by replacing the action's values (longest
/// first, whole words) with placeholders. Pairs whose values cannot all be
/// located are skipped and counted.
TemplateStore mine_templates(const std::vector<std::pair<std::vector<DialogAct>, std::string>>& corpus,
                             MiningReport* report = nullptr);

/// Reads a line-delimited corpus of {"action": {...}, "utterance": "..."}.
std::vector<std::pair<std::vector<DialogAct>, std::string>> load_nlg_corpus(const std::filesystem::path& path);

/// Substitutes {key} placeholders. Values are inserted literally.
std::string fill_slots(const std::string& text, const std::map<std::string, std::string>& values);

struct Generation {
  std::string text;
  std::size_t fragments = 0;
  std::size_t fallbacks = 0;
};

/// Greedy cover of the action's (domain-intent, slot) pairs by the largest
/// exactly matching template signatures; fragments are joined by one space.
Generation generate(const SystemAction& action, const TemplateStore& store);

extern const std::string kReqmoreUtterance;
extern const std::string kGoodbyeUtterance;

}  // namespace hceds
