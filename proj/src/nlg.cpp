#include "hceds/nlg.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "hceds/entity_db.hpp"
#include "hceds/text.hpp"

namespace hceds {

const std::string kReqmoreUtterance = "is there anything else i can help you with ?";
const std::string kGoodbyeUtterance = "thank you for using our service . goodbye .";

namespace {

std::string join_signature(const Signature& sig) {
  std::string out;
  for (const auto& [label, slot] : sig) {
    if (!out.empty()) out += '|';
    out += label + "." + slot;
  }
  return out;
}

Signature parse_signature(const std::string& s) {
  Signature sig;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, '|')) {
    const auto dot = item.rfind('.');
    if (dot == std::string::npos) throw TemplateError("malformed signature item '" + item + "'");
    sig.emplace_back(item.substr(0, dot), item.substr(dot + 1));
  }
  std::sort(sig.begin(), sig.end());
  return sig;
}

bool is_placeholder_value(const std::string& v) { return v == "none" || v == "?" || v.empty(); }

bool is_trailing_punct(char c) { return c == '.' || c == ',' || c == '!' || c == '?'; }

/// Detaches sentence punctuation glued to the end of a word: "free." -> "free .".
std::string space_punctuation(const std::string& text) {
  std::string out;
  for (const auto& w : split_words(text)) {
    if (!out.empty()) out += ' ';
    if (w.size() > 1 && is_trailing_punct(w.back())) {
      out += w.substr(0, w.size() - 1) + " " + w.back();
    } else {
      out += w;
    }
  }
  return out;
}

/// Replaces the first whole-word occurrence of needle in hay; false when absent.
bool replace_word_run(std::string& hay, const std::string& needle, const std::string& with) {
  std::size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    const bool left = pos == 0 || hay[pos - 1] == ' ';
    const std::size_t end = pos + needle.size();
    const bool right = end == hay.size() || hay[end] == ' ' ||
                       (is_trailing_punct(hay[end]) && (end + 1 == hay.size() || hay[end + 1] == ' '));
    if (left && right) {
      hay.replace(pos, needle.size(), with);
      return true;
    }
    ++pos;
  }
  return false;
}

}  // namespace

std::string placeholder(const SignaturePair& p) { return "{" + p.first + "." + p.second + "}"; }

void TemplateStore::add(const Signature& sig, const std::string& text, std::size_t count) {
  if (sig.empty()) throw TemplateError("template signature must not be empty");
  counts_[sig][text] += count;
  reindex(sig);
}

void TemplateStore::merge(const TemplateStore& other) {
  for (const auto& [sig, texts] : other.counts_) {
    for (const auto& [text, n] : texts) counts_[sig][text] += n;
    reindex(sig);
  }
}

void TemplateStore::reindex(const Signature& sig) {
  const Template* best_t = nullptr;
  Template cand;
  for (const auto& [text, n] : counts_[sig]) {
    const bool better = !best_t || n > cand.source_count ||
                        (n == cand.source_count &&
                         (text.size() < cand.text.size() || (text.size() == cand.text.size() && text < cand.text)));
    if (better) {
      cand = Template{sig, text, n};
      best_t = &cand;
    }
  }
  index_[sig] = cand;
}

const Template* TemplateStore::best(const Signature& sig) const {
  auto it = index_.find(sig);
  return it == index_.end() ? nullptr : &it->second;
}

std::vector<Template> TemplateStore::all() const {
  std::vector<Template> out;
  for (const auto& [sig, texts] : counts_) {
    for (const auto& [text, n] : texts) out.push_back({sig, text, n});
  }
  return out;
}

void TemplateStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write template store " + path.string());
  for (const auto& t : all()) out << t.source_count << '\t' << join_signature(t.signature) << '\t' << t.text << '\n';
}

TemplateStore TemplateStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open template store " + path.string());
  TemplateStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw TemplateError(path.string() + ":" + std::to_string(lineno) + ": expected count<TAB>signature<TAB>text");
    }
    store.add(parse_signature(line.substr(t1 + 1, t2 - t1 - 1)), line.substr(t2 + 1),
              static_cast<std::size_t>(std::stoul(line.substr(0, t1))));
  }
  return store;
}

TemplateStore TemplateStore::defaults(const Schema& schema) {
  TemplateStore s;
  auto put = [&](const std::string& label, const std::string& slot, const std::string& text) {
    s.add({{label, slot}}, text, 0);
  };
  for (const auto& d : schema.domains()) {
    const std::string D = act_domain(d.name);
    const std::string& name = d.name;
    std::set<std::string> informable;
    for (const auto& f : d.semi) informable.insert(schema.act_slot(f));
    for (const auto& f : d.book) informable.insert(schema.act_slot(f));
    std::set<std::string> answerable(d.requestable.begin(), d.requestable.end());
    answerable.insert(informable.begin(), informable.end());
    const std::string key = schema.act_slot(d.key_field);
    answerable.insert(key);
    for (const auto& slot : answerable) {
      const std::string ph = placeholder({D + "-Inform", slot});
      if (slot == "Car") {
        put(D + "-Inform", slot, "i have booked your taxi . be expecting a " + ph + " .");
      } else if (slot == "Phone" && name == "taxi") {
        put(D + "-Inform", slot, "the taxi contact number is " + ph + " .");
      } else {
        put(D + "-Inform", slot, "the " + name + " " + schema.phrase(slot) + " is " + ph + " .");
      }
    }
    put(D + "-Inform", "Choice", "there are " + placeholder({D + "-Inform", "Choice"}) + " " + name + " options that match .");
    put(D + "-Recommend", key, "i would recommend " + placeholder({D + "-Recommend", key}) + " .");
    put(D + "-NoOffer", "none", "sorry , i can not find a matching " + name + " .");
    for (const auto& slot : informable) {
      put(D + "-NoOffer", slot,
          "sorry , there is no " + name + " with " + schema.phrase(slot) + " " + placeholder({D + "-NoOffer", slot}) + " .");
      put(D + "-Request", slot, "what " + schema.phrase(slot) + " would you like ?");
    }
    if (!d.booking_required.empty()) {
      put(D + "-Book", key, "i have booked " + placeholder({D + "-Book", key}) + " for you .");
      put(D + "-Book", "Ref", "your reference number is " + placeholder({D + "-Book", "Ref"}) + " .");
      put(D + "-NoBook", "none", "sorry , the " + name + " booking was unsuccessful .");
    }
  }
  put("general-greet", "none", "hello , how can i help you ?");
  put("general-welcome", "none", "you are welcome .");
  put("general-reqmore", "none", kReqmoreUtterance);
  put("general-bye", "none", "goodbye .");
  return s;
}

TemplateStore mine_templates(const std::vector<std::pair<std::vector<DialogAct>, std::string>>& corpus,
                             MiningReport* report) {
  TemplateStore store;
  MiningReport r;
  for (const auto& [acts, utterance] : corpus) {
    if (acts.empty()) {
      ++r.skipped;
      continue;
    }
    std::string text = normalize(utterance);
    std::vector<const DialogAct*> order;
    for (const auto& a : acts) order.push_back(&a);
    std::stable_sort(order.begin(), order.end(),
                     [](const DialogAct* a, const DialogAct* b) { return a->value.size() > b->value.size(); });
    Signature sig;
    bool ok = true;
    for (const DialogAct* a : order) {
      SignaturePair p{a->label(), a->slot};
      if (std::find(sig.begin(), sig.end(), p) != sig.end()) {
        ok = false;
        break;
      }
      sig.push_back(p);
      if (is_placeholder_value(a->value)) continue;
      if (!replace_word_run(text, normalize_value(a->value), placeholder(p))) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      ++r.skipped;
      continue;
    }
    std::sort(sig.begin(), sig.end());
    store.add(sig, space_punctuation(text), 1);
    ++r.mined;
  }
  if (report) *report = r;
  return store;
}

std::vector<std::pair<std::vector<DialogAct>, std::string>> load_nlg_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open nlg corpus " + path.string());
  std::vector<std::pair<std::vector<DialogAct>, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::ordered_json::parse(line);
    out.emplace_back(acts_from_json(j.at("action")), j.at("utterance").get<std::string>());
  }
  return out;
}

std::string fill_slots(const std::string& text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      out.push_back(text[i++]);
      continue;
    }
    const auto close = text.find('}', i);
    if (close == std::string::npos) throw TemplateError("unterminated placeholder in '" + text + "'");
    const std::string key = text.substr(i + 1, close - i - 1);
    auto it = values.find(key);
    if (it == values.end()) throw TemplateError("no value for placeholder {" + key + "}");
    out += it->second;
    i = close + 1;
  }
  return out;
}

Generation generate(const SystemAction& action, const TemplateStore& store) {
  Generation g;
  if (action.close_session) {
    g.text = kGoodbyeUtterance;
    g.fragments = 1;
    return g;
  }
  if (action.acts.empty()) {
    g.text = kReqmoreUtterance;
    g.fragments = 1;
    return g;
  }
  const auto& acts = action.acts;
  std::vector<bool> covered(acts.size(), false);
  const auto templates = store.all();
  // candidate signatures, largest first
  std::vector<const Template*> candidates;
  std::set<Signature> seen;
  for (const auto& t : templates) {
    if (seen.insert(t.signature).second) candidates.push_back(store.best(t.signature));
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Template* a, const Template* b) {
    if (a->signature.size() != b->signature.size()) return a->signature.size() > b->signature.size();
    if (a->source_count != b->source_count) return a->source_count > b->source_count;
    return a->text.size() < b->text.size();
  });

  struct Fragment {
    std::size_t first_act;
    std::string text;
  };
  std::vector<Fragment> fragments;
  std::size_t remaining = acts.size();
  while (remaining > 0) {
    const Template* chosen = nullptr;
    std::vector<std::size_t> used;
    for (const Template* t : candidates) {
      if (t->signature.size() > remaining) continue;
      std::vector<std::size_t> assign;
      for (const auto& p : t->signature) {
        bool found = false;
        for (std::size_t i = 0; i < acts.size() && !found; ++i) {
          if (covered[i] || std::find(assign.begin(), assign.end(), i) != assign.end()) continue;
          if (acts[i].label() == p.first && acts[i].slot == p.second) {
            assign.push_back(i);
            found = true;
          }
        }
        if (!found) break;
      }
      bool faithful = assign.size() == t->signature.size();
      for (std::size_t k = 0; faithful && k < assign.size(); ++k) {
        faithful = is_placeholder_value(acts[assign[k]].value) ||
                   t->text.find(placeholder(t->signature[k])) != std::string::npos;
      }
      if (faithful) {
        chosen = t;
        used = std::move(assign);
        break;
      }
    }
    if (!chosen) {
      // no template at all: generic single-slot fallback for the first uncovered act
      std::size_t i = 0;
      while (covered[i]) ++i;
      covered[i] = true;
      --remaining;
      ++g.fallbacks;
      fragments.push_back({i, "the " + domain_key(acts[i].slot) + " is " + acts[i].value + " ."});
      continue;
    }
    std::map<std::string, std::string> values;
    for (std::size_t k = 0; k < used.size(); ++k) {
      values[chosen->signature[k].first + "." + chosen->signature[k].second] = acts[used[k]].value;
      covered[used[k]] = true;
    }
    remaining -= used.size();
    fragments.push_back({*std::min_element(used.begin(), used.end()), fill_slots(chosen->text, values)});
  }
  std::stable_sort(fragments.begin(), fragments.end(),
                   [](const Fragment& a, const Fragment& b) { return a.first_act < b.first_act; });
  for (const auto& f : fragments) {
    if (!g.text.empty()) g.text += ' ';
    g.text += f.text;
  }
  g.fragments = fragments.size();
  return g;
}

}  // namespace hceds
