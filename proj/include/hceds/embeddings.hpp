#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hceds/graph.hpp"
#include "hceds/tensor.hpp"
#include "hceds/text.hpp"

namespace hceds {

std::uint64_t fnv1a64(std::string_view s);

struct EmbedStats {
  std::size_t lookups = 0;
  std::size_t fallbacks = 0;
  double fallback_fraction() const { return lookups ? static_cast<double>(fallbacks) / lookups : 0.0; }
};

/// Frozen contextual vectors keyed by (sentence, subword position), with a
/// deterministic hash projection for anything not in the store.
class ContextualEmbeddingProvider {
 public:
  explicit ContextualEmbeddingProvider(std::size_t d_ctx = 768) : dim_(d_ctx) {}

  /// Binary store: u64 d_ctx, u64 count, then per record u64 sentence key,
  /// u32 subword index and d_ctx f64 values. Throws FormatError when corrupt.
  static ContextualEmbeddingProvider load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Key of a sentence: FNV-1a of its normalized text.
  static std::uint64_t sentence_key(std::string_view text);

  void add(std::uint64_t sentence, std::uint32_t index, std::vector<double> values);
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return store_.size(); }

  /// One d_ctx vector per subword of tok.
  std::vector<Tensor> embed(const TokenizedUtterance& tok, EmbedStats* stats = nullptr) const;
  /// Uniform [-1, 1] entries seeded by the hash of the token string.
  Tensor fallback(std::string_view token) const;

 private:
  static std::uint64_t record_key(std::uint64_t sentence, std::uint32_t index) {
    return sentence * 1000003ULL ^ index;
  }
  std::size_t dim_;
  std::unordered_map<std::uint64_t, std::vector<double>> store_;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> order_;
};

/// Reads "sentence<TAB>position<TAB>v1 v2 ..." lines into a provider. The
/// sentence text is normalized before hashing. Dimension mismatches throw.
ContextualEmbeddingProvider ingest_embeddings(std::istream& in, std::size_t d_ctx);

/// Character ids: 0 pad, 1 unknown, 2.. printable ASCII.
constexpr int kCharPad = 0;
constexpr int kCharUnk = 1;
constexpr std::size_t kCharVocab = 2 + 95;
std::vector<int> char_ids(std::string_view surface);

struct CharCnnParams {
  Parameter table;  // kCharVocab x char_dim
  Parameter W;      // filters x 3 * char_dim
  Parameter b;      // filters
  static CharCnnParams create(const std::string& name, std::size_t char_dim, std::size_t filters, Rng& rng);
  std::size_t filters() const { return b.value.size(); }
};

struct CharCnnVars {
  Graph::Var table;
  Graph::Var W;
  Graph::Var b;
};
CharCnnVars bind(Graph& g, CharCnnParams& p);
CharCnnVars bind(Graph& g, const CharCnnParams& p);

/// Conv width 3, tanh, max over time. Empty surface gives a zero vector.
Graph::Var char_cnn_embed(Graph& g, std::string_view surface, const CharCnnVars& cnn);

/// e_token_i = contextual_i (+) charcnn(surface of piece i).
std::vector<Graph::Var> token_embed(Graph& g, const TokenizedUtterance& tok, const ContextualEmbeddingProvider& provider,
                                    const CharCnnVars& cnn, EmbedStats* stats = nullptr);

}  // namespace hceds
