#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hceds {

class AnnotationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Lowercases ASCII letters and collapses whitespace runs to one space.
std::string normalize(std::string_view text);
/// Splits already-normalized text on spaces.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(const std::vector<std::string>& words, std::size_t first, std::size_t last);

/// Byte-pair-encoding codec. Symbols are characters; the final symbol of a
/// word carries the end-of-word marker "</w>".
class BpeCodec {
 public:
  static constexpr std::string_view kEndOfWord = "</w>";
  static constexpr int kUnk = 0;
  static constexpr int kPad = 1;
  static constexpr int kUserMarker = 2;
  static constexpr int kSystemMarker = 3;

  BpeCodec();

  /// Learns up to num_merges merges (fewer if no adjacent pair remains).
  /// The most frequent pair wins; ties go to the lexicographically smallest.
  static BpeCodec train(const std::vector<std::string>& corpus, std::size_t num_merges);

  std::vector<std::string> segment(std::string_view word) const;
  int id(std::string_view piece) const;
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  std::size_t vocab_size() const { return pieces_.size(); }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  /// Special pseudo-word ("<usr>", "<sys>", "<pad>") to id, or -1.
  static int special_id(std::string_view word);

  std::string to_text() const;
  static BpeCodec from_text(const std::string& text);

  friend bool operator==(const BpeCodec& a, const BpeCodec& b) {
    return a.merges_ == b.merges_ && a.pieces_ == b.pieces_;
  }

 private:
  void add_piece(const std::string& p);
  void rebuild_ranks();

  std::vector<std::pair<std::string, std::string>> merges_;
  std::map<std::pair<std::string, std::string>, std::size_t> ranks_;
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> vocab_;
};

/// Strips the end-of-word marker from a piece.
std::string piece_surface(std::string_view piece);

struct TokenizedUtterance {
  std::string raw;
  std::vector<std::string> words;
  std::vector<int> subwords;
  std::vector<std::string> pieces;
  std::vector<std::size_t> word_of_subword;

  /// Index of the first subword of each word.
  std::vector<std::size_t> word_starts() const;
};

TokenizedUtterance tokenize(std::string_view text, const BpeCodec& codec);

struct SlotSpan {
  std::string label;
  std::size_t first_word = 0;
  std::size_t last_word = 0;

  friend bool operator==(const SlotSpan&, const SlotSpan&) = default;
};

struct BioxSequence {
  std::vector<std::string> tags;
};

/// B on the first subword of a span's first word, I on the first subword of
/// later in-span words, X on every non-initial subword, O elsewhere.
BioxSequence biox_align(const TokenizedUtterance& tok, const std::vector<SlotSpan>& spans);

struct DecodedSpan {
  std::string label;
  std::size_t first_word = 0;
  std::size_t last_word = 0;
  std::string value;

  SlotSpan span() const { return {label, first_word, last_word}; }
};

struct BioxDecodeResult {
  std::vector<DecodedSpan> spans;
  std::size_t repairs = 0;
};

/// Reads tags on word-initial subwords only. An I that does not continue a
/// span of the same label is repaired into a B; an X on a word-initial
/// subword is read as O. Both count as repairs.
BioxDecodeResult biox_decode(const TokenizedUtterance& tok, const BioxSequence& tags);

}  // namespace hceds
