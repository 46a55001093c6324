#include "hceds/embeddings.hpp"

#include <fstream>
#include <sstream>

#include "hceds/checkpoint.hpp"

namespace hceds {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t ContextualEmbeddingProvider::sentence_key(std::string_view text) { return fnv1a64(normalize(text)); }

void ContextualEmbeddingProvider::add(std::uint64_t sentence, std::uint32_t index, std::vector<double> values) {
  if (values.size() != dim_) {
    throw ShapeError("embedding of size " + std::to_string(values.size()) + " for d_ctx " + std::to_string(dim_));
  }
  const auto key = record_key(sentence, index);
  if (!store_.count(key)) order_.emplace_back(sentence, index);
  store_[key] = std::move(values);
}

Tensor ContextualEmbeddingProvider::fallback(std::string_view token) const {
  Rng rng(fnv1a64(token));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t({dim_});
  for (auto& v : t.values()) v = u(rng);
  return t;
}

std::vector<Tensor> ContextualEmbeddingProvider::embed(const TokenizedUtterance& tok, EmbedStats* stats) const {
  std::vector<Tensor> out;
  out.reserve(tok.pieces.size());
  const std::uint64_t sentence = sentence_key(tok.raw);
  for (std::size_t i = 0; i < tok.pieces.size(); ++i) {
    auto it = store_.empty() ? store_.end() : store_.find(record_key(sentence, static_cast<std::uint32_t>(i)));
    if (stats) ++stats->lookups;
    if (it != store_.end()) {
      out.emplace_back(std::vector<std::size_t>{dim_}, it->second);
    } else {
      if (stats) ++stats->fallbacks;
      out.push_back(fallback(tok.pieces[i]));
    }
  }
  return out;
}

void ContextualEmbeddingProvider::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embedding store " + path.string());
  binio::write_u64(out, dim_);
  binio::write_u64(out, order_.size());
  for (const auto& [sentence, index] : order_) {
    binio::write_u64(out, sentence);
    binio::write_u32(out, index);
    for (double v : store_.at(record_key(sentence, index))) binio::write_f64(out, v);
  }
}

ContextualEmbeddingProvider ContextualEmbeddingProvider::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open embedding store " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  if (bytes < 16) throw FormatError(path.string() + ": truncated embedding store header");
  const std::uint64_t dim = binio::read_u64(in);
  const std::uint64_t count = binio::read_u64(in);
  if (dim == 0 || dim > (1u << 20)) throw FormatError(path.string() + ": implausible d_ctx " + std::to_string(dim));
  if (bytes != 16 + count * (12 + 8 * dim)) {
    throw FormatError(path.string() + ": size does not match " + std::to_string(count) + " records of d_ctx " +
                      std::to_string(dim));
  }
  ContextualEmbeddingProvider p(dim);
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::uint64_t sentence = binio::read_u64(in);
    const std::uint32_t index = binio::read_u32(in);
    std::vector<double> v(dim);
    for (auto& x : v) x = binio::read_f64(in);
    p.add(sentence, index, std::move(v));
  }
  return p;
}

ContextualEmbeddingProvider ingest_embeddings(std::istream& in, std::size_t d_ctx) {
  ContextualEmbeddingProvider p(d_ctx);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw FormatError("line " + std::to_string(lineno) + ": expected sentence<TAB>position<TAB>values");
    }
    std::istringstream vs(line.substr(t2 + 1));
    std::vector<double> values;
    double x;
    while (vs >> x) values.push_back(x);
    if (values.size() != d_ctx) {
      throw FormatError("line " + std::to_string(lineno) + ": " + std::to_string(values.size()) + " values, expected " +
                        std::to_string(d_ctx));
    }
    const auto pos = static_cast<std::uint32_t>(std::stoul(line.substr(t1 + 1, t2 - t1 - 1)));
    p.add(ContextualEmbeddingProvider::sentence_key(line.substr(0, t1)), pos, std::move(values));
  }
  return p;
}

std::vector<int> char_ids(std::string_view surface) {
  std::vector<int> ids;
  ids.reserve(surface.size());
  for (unsigned char c : surface) ids.push_back(c >= 32 && c <= 126 ? 2 + (c - 32) : kCharUnk);
  return ids;
}

CharCnnParams CharCnnParams::create(const std::string& name, std::size_t char_dim, std::size_t filters, Rng& rng) {
  CharCnnParams p;
  p.table = make_weight(name + ".chars", kCharVocab, char_dim, rng);
  p.W = make_weight(name + ".W", filters, 3 * char_dim, rng);
  p.b = make_bias(name + ".b", filters);
  return p;
}

CharCnnVars bind(Graph& g, CharCnnParams& p) { return {g.param(p.table), g.param(p.W), g.param(p.b)}; }

CharCnnVars bind(Graph& g, const CharCnnParams& p) { return {g.frozen(p.table), g.frozen(p.W), g.frozen(p.b)}; }

Graph::Var char_cnn_embed(Graph& g, std::string_view surface, const CharCnnVars& cnn) {
  const auto ids = char_ids(surface);
  return g.char_conv_maxpool(cnn.table, ids, kCharPad, cnn.W, cnn.b);
}

std::vector<Graph::Var> token_embed(Graph& g, const TokenizedUtterance& tok, const ContextualEmbeddingProvider& provider,
                                    const CharCnnVars& cnn, EmbedStats* stats) {
  auto ctx = provider.embed(tok, stats);
  std::vector<Graph::Var> out;
  out.reserve(ctx.size());
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    const Graph::Var parts[] = {g.input(std::move(ctx[i])), char_cnn_embed(g, piece_surface(tok.pieces[i]), cnn)};
    out.push_back(g.concat(parts));
  }
  return out;
}

}  // namespace hceds
