#include "hceds/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "hceds/tensor.hpp"

namespace hceds {

namespace {

using Pair = std::pair<std::string, std::string>;

const std::vector<std::string> kSpecials = {"<unk>", "<pad>", "<usr>", "<sys>"};

std::vector<std::string> initial_symbols(std::string_view word) {
  std::vector<std::string> syms;
  syms.reserve(word.size());
  for (std::size_t i = 0; i < word.size(); ++i) {
    std::string s(1, word[i]);
    if (i + 1 == word.size()) s += BpeCodec::kEndOfWord;
    syms.push_back(std::move(s));
  }
  return syms;
}

void merge_in_place(std::vector<std::string>& syms, const Pair& p) {
  std::vector<std::string> out;
  out.reserve(syms.size());
  for (std::size_t i = 0; i < syms.size(); ++i) {
    if (i + 1 < syms.size() && syms[i] == p.first && syms[i + 1] == p.second) {
      out.push_back(syms[i] + syms[i + 1]);
      ++i;
    } else {
      out.push_back(std::move(syms[i]));
    }
  }
  syms = std::move(out);
}

}  // namespace

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string join_words(const std::vector<std::string>& words, std::size_t first, std::size_t last) {
  std::string out;
  for (std::size_t w = first; w <= last && w < words.size(); ++w) {
    if (w > first) out += ' ';
    out += words[w];
  }
  return out;
}

std::string piece_surface(std::string_view piece) {
  if (piece.size() >= BpeCodec::kEndOfWord.size() &&
      piece.substr(piece.size() - BpeCodec::kEndOfWord.size()) == BpeCodec::kEndOfWord) {
    piece.remove_suffix(BpeCodec::kEndOfWord.size());
  }
  return std::string(piece);
}

BpeCodec::BpeCodec() {
  for (const auto& s : kSpecials) add_piece(s);
}

void BpeCodec::add_piece(const std::string& p) {
  if (vocab_.count(p)) return;
  vocab_.emplace(p, static_cast<int>(pieces_.size()));
  pieces_.push_back(p);
}

void BpeCodec::rebuild_ranks() {
  ranks_.clear();
  for (std::size_t r = 0; r < merges_.size(); ++r) ranks_.emplace(merges_[r], r);
}

int BpeCodec::special_id(std::string_view word) {
  for (std::size_t i = 1; i < kSpecials.size(); ++i) {
    if (word == kSpecials[i]) return static_cast<int>(i);
  }
  return -1;
}

BpeCodec BpeCodec::train(const std::vector<std::string>& corpus, std::size_t num_merges) {
  if (corpus.empty()) throw ParameterError("bpe_train: empty corpus");
  std::map<std::string, long> freq;
  for (const auto& line : corpus) {
    for (auto& w : split_words(normalize(line))) {
      if (special_id(w) < 0) ++freq[w];
    }
  }
  BpeCodec codec;
  std::set<std::string> alphabet;
  std::vector<std::vector<std::string>> words;
  std::vector<long> counts;
  for (const auto& [w, f] : freq) {
    for (char c : w) alphabet.insert(std::string(1, c));
    words.push_back(initial_symbols(w));
    counts.push_back(f);
  }
  for (const auto& c : alphabet) codec.add_piece(c);
  for (const auto& c : alphabet) codec.add_piece(c + std::string(kEndOfWord));

  std::map<Pair, long> pair_counts;
  std::map<Pair, std::set<std::size_t>> where;
  // ordered by (-count, pair): begin() is the next merge
  std::set<std::pair<long, Pair>> queue;

  auto adjust = [&](const Pair& p, long delta, std::size_t word) {
    long& c = pair_counts[p];
    if (c > 0) queue.erase({-c, p});
    c += delta;
    if (c > 0) queue.insert({-c, p});
    if (delta > 0) where[p].insert(word);
  };
  auto account = [&](std::size_t wi, long sign) {
    const auto& s = words[wi];
    for (std::size_t i = 0; i + 1 < s.size(); ++i) adjust({s[i], s[i + 1]}, sign * counts[wi], wi);
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) account(wi, +1);

  while (codec.merges_.size() < num_merges && !queue.empty()) {
    const Pair best = queue.begin()->second;
    const std::set<std::size_t> touched = where[best];
    for (std::size_t wi : touched) {
      account(wi, -1);
      merge_in_place(words[wi], best);
      account(wi, +1);
    }
    where.erase(best);
    codec.merges_.push_back(best);
    codec.add_piece(best.first + best.second);
  }
  codec.rebuild_ranks();
  return codec;
}

std::vector<std::string> BpeCodec::segment(std::string_view word) const {
  if (word.empty()) return {};
  if (special_id(word) >= 0) return {std::string(word)};
  auto syms = initial_symbols(word);
  while (syms.size() > 1) {
    std::size_t best_rank = SIZE_MAX;
    const Pair* best = nullptr;
    Pair candidate;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = ranks_.find({syms[i], syms[i + 1]});
      if (it != ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = &it->first;
      }
    }
    if (!best) break;
    candidate = *best;
    merge_in_place(syms, candidate);
  }
  return syms;
}

int BpeCodec::id(std::string_view piece) const {
  auto it = vocab_.find(std::string(piece));
  return it == vocab_.end() ? kUnk : it->second;
}

std::string BpeCodec::to_text() const {
  std::ostringstream out;
  out << "#merges " << merges_.size() << '\n';
  for (const auto& [a, b] : merges_) out << a << ' ' << b << '\n';
  out << "#vocab " << pieces_.size() << '\n';
  for (std::size_t i = 0; i < pieces_.size(); ++i) out << pieces_[i] << ' ' << i << '\n';
  return out.str();
}

BpeCodec BpeCodec::from_text(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  std::size_t n = 0;
  if (!(in >> header >> n) || header != "#merges") throw ParameterError("codec text: missing #merges header");
  BpeCodec codec;
  codec.pieces_.clear();
  codec.vocab_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    Pair p;
    if (!(in >> p.first >> p.second)) throw ParameterError("codec text: truncated merge list");
    codec.merges_.push_back(std::move(p));
  }
  if (!(in >> header >> n) || header != "#vocab") throw ParameterError("codec text: missing #vocab header");
  for (std::size_t i = 0; i < n; ++i) {
    std::string piece;
    std::size_t id = 0;
    if (!(in >> piece >> id) || id != i) throw ParameterError("codec text: vocabulary ids must be dense and ordered");
    codec.add_piece(piece);
  }
  for (std::size_t i = 0; i < kSpecials.size(); ++i) {
    if (codec.pieces_.size() <= i || codec.pieces_[i] != kSpecials[i]) {
      throw ParameterError("codec text: special tokens missing");
    }
  }
  codec.rebuild_ranks();
  return codec;
}

std::vector<std::size_t> TokenizedUtterance::word_starts() const {
  std::vector<std::size_t> starts(words.size(), 0);
  for (std::size_t s = subwords.size(); s-- > 0;) starts[word_of_subword[s]] = s;
  return starts;
}

TokenizedUtterance tokenize(std::string_view text, const BpeCodec& codec) {
  TokenizedUtterance tok;
  tok.raw = std::string(text);
  tok.words = split_words(normalize(text));
  for (std::size_t w = 0; w < tok.words.size(); ++w) {
    for (auto& p : codec.segment(tok.words[w])) {
      const int special = BpeCodec::special_id(p);
      tok.subwords.push_back(special >= 0 ? special : codec.id(p));
      tok.pieces.push_back(std::move(p));
      tok.word_of_subword.push_back(w);
    }
  }
  return tok;
}

BioxSequence biox_align(const TokenizedUtterance& tok, const std::vector<SlotSpan>& spans) {
  const std::size_t nw = tok.words.size();
  std::vector<int> owner(nw, -1);
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto& s = spans[k];
    if (s.first_word > s.last_word || s.last_word >= nw) {
      throw AnnotationError("span '" + s.label + "' [" + std::to_string(s.first_word) + ", " +
                            std::to_string(s.last_word) + "] is outside the " + std::to_string(nw) + "-word utterance");
    }
    for (std::size_t w = s.first_word; w <= s.last_word; ++w) {
      if (owner[w] >= 0) {
        const auto& o = spans[static_cast<std::size_t>(owner[w])];
        throw AnnotationError("spans '" + o.label + "' [" + std::to_string(o.first_word) + ", " +
                              std::to_string(o.last_word) + "] and '" + s.label + "' [" + std::to_string(s.first_word) +
                              ", " + std::to_string(s.last_word) + "] overlap");
      }
      owner[w] = static_cast<int>(k);
    }
  }
  BioxSequence seq;
  seq.tags.reserve(tok.subwords.size());
  for (std::size_t i = 0; i < tok.subwords.size(); ++i) {
    const std::size_t w = tok.word_of_subword[i];
    if (i > 0 && tok.word_of_subword[i - 1] == w) {
      seq.tags.emplace_back("X");
    } else if (owner[w] < 0) {
      seq.tags.emplace_back("O");
    } else {
      const auto& s = spans[static_cast<std::size_t>(owner[w])];
      seq.tags.push_back((w == s.first_word ? "B-" : "I-") + s.label);
    }
  }
  return seq;
}

BioxDecodeResult biox_decode(const TokenizedUtterance& tok, const BioxSequence& tags) {
  if (tags.tags.size() != tok.subwords.size()) {
    throw ShapeError("biox_decode: " + std::to_string(tags.tags.size()) + " tags for " +
                     std::to_string(tok.subwords.size()) + " subwords");
  }
  BioxDecodeResult result;
  result.spans.reserve(tok.words.size());
  DecodedSpan* open = nullptr;
  auto start = [&](const std::string& label, std::size_t w) {
    result.spans.push_back({label, w, w, {}});
    open = &result.spans.back();
  };
  const auto starts = tok.word_starts();
  for (std::size_t w = 0; w < tok.words.size(); ++w) {
    const std::string& t = tags.tags[starts[w]];
    if (t.rfind("B-", 0) == 0) {
      start(t.substr(2), w);
    } else if (t.rfind("I-", 0) == 0) {
      const std::string label = t.substr(2);
      if (open && open->label == label && open->last_word + 1 == w) {
        open->last_word = w;
      } else {
        ++result.repairs;
        start(label, w);
      }
    } else {
      if (t == "X") ++result.repairs;
      open = nullptr;
    }
  }
  for (auto& s : result.spans) s.value = join_words(tok.words, s.first_word, s.last_word);
  return result;
}

}  // namespace hceds
