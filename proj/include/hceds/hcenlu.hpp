#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hceds/dialog_state.hpp"
#include "hceds/embeddings.hpp"
#include "hceds/evaluation.hpp"
#include "hceds/graph.hpp"
#include "hceds/pipeline.hpp"
#include "hceds/text.hpp"

namespace hceds {

struct HcenluConfig {
  std::size_t d_ctx = 768;
  std::size_t char_dim = 16;
  std::size_t filters = 128;
  /// Token-level BiLSTM hidden size (per direction).
  std::size_t hidden = 200;
  /// Sentence-level BiLSTM hidden size (per direction).
  std::size_t sentence_hidden = 200;
  /// Dialogue-context window in turns.
  std::size_t window = 4;
  double threshold = 0.5;
  bool use_cnn = true;
  /// Feed c_dc and the last context state into the tag head.
  bool tag_context = true;
  /// Attend over the context for the intent head.
  bool intent_attention = true;

  double learning_rate = 0.001;
  double clip = 5.0;
  double dropout = 0.5;
  std::size_t epochs = 10;
  std::size_t batch = 16;
  std::uint64_t seed = 1;
  std::size_t bpe_merges = 4000;

  std::string to_text() const;
  static HcenluConfig from_text(const std::string& text);
};

struct TrainingExample {
  std::string utterance;
  /// Completed turns before the utterance, oldest first.
  std::vector<Turn> context;
  std::vector<std::string> labels;
  std::vector<SlotSpan> spans;
  bool context_dependent = false;
};

struct DialogContextWindow {
  std::vector<Turn> turns;
  std::size_t w = 0;
};

/// The last w turns, oldest first.
DialogContextWindow build_context(const std::vector<Turn>& history, std::size_t w);
/// "<usr> ... <sys> ..." with a marker before each turn; "<pad>" when empty.
std::string context_text(const DialogContextWindow& window);

/// Indices with probability >= threshold, or the single argmax if none pass.
std::vector<std::size_t> predict_domain_intent(const std::vector<double>& probs, double threshold);

/// Spans become acts (Request values read "?"); labels without any span give
/// a slot-less act. Spans are trusted even when their label was not predicted.
std::vector<DialogAct> decode_acts(const std::vector<std::string>& labels, const std::vector<DecodedSpan>& spans);
std::vector<DialogAct> decode_acts(const std::vector<std::string>& labels, const BioxSequence& tags,
                                   const TokenizedUtterance& tok, std::size_t* repairs = nullptr);

/// Tag alphabet for a set of span labels: "O", "X", then B-/I- per label.
std::vector<std::string> tag_inventory(const std::vector<std::string>& span_labels);

struct NluOutput {
  std::map<std::string, double> intent_probs;
  std::vector<std::vector<double>> tag_distributions;
  std::vector<std::string> labels;
  BioxSequence tags;
  std::vector<DecodedSpan> spans;
  std::vector<DialogAct> acts;
  std::size_t repairs = 0;
  /// Attention weights over the context tokens.
  std::vector<double> attention;
  EmbedStats embed_stats;
};

/// Tokenised and embedded (contextual part only) input of one example.
struct PreparedSequence {
  std::vector<Tensor> contextual;
  std::vector<std::string> surfaces;
};

struct PreparedExample {
  TokenizedUtterance uu;
  PreparedSequence uu_seq;
  PreparedSequence dc_seq;
  Tensor intent_targets;
  std::vector<std::size_t> tag_ids;
};

class HcenluModel : public Parser {
 public:
  HcenluModel() = default;
  /// Fresh parameters for the given inventories. An empty provider is
  /// replaced by a hash-only one of the configured d_ctx.
  static HcenluModel create(const HcenluConfig& config, BpeCodec codec, std::vector<std::string> labels,
                            std::vector<std::string> span_labels, ContextualEmbeddingProvider provider = ContextualEmbeddingProvider(0));

  const HcenluConfig& config() const { return config_; }
  HcenluConfig& mutable_config() { return config_; }
  const BpeCodec& codec() const { return codec_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& tags() const { return tags_; }
  const ContextualEmbeddingProvider& provider() const { return provider_; }
  void set_provider(ContextualEmbeddingProvider p);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  PreparedExample prepare(const std::string& utterance, const std::vector<Turn>& history,
                          EmbedStats* stats = nullptr) const;
  /// Also fills the training targets; throws AnnotationError on bad spans.
  PreparedExample prepare(const TrainingExample& ex, EmbedStats* stats = nullptr) const;

  struct Forward {
    Graph::Var intent_logits;
    std::vector<Graph::Var> tag_logits;
    Graph::Var context;
    std::vector<double> attention;
  };
  /// trainable binds parameters with gradients; dropout_rng enables dropout.
  Forward forward(Graph& g, const PreparedExample& ex, bool trainable, Rng* dropout_rng);

  /// Mean over the batch of (bce + xent). With backward, gradients are
  /// accumulated into the parameters. Dropout masks come from dropout_seed.
  double compute_loss(const std::vector<const PreparedExample*>& batch, bool backward,
                      std::optional<std::uint64_t> dropout_seed);

  NluOutput analyse(const PreparedExample& ex) const;
  NluOutput analyse(const std::string& utterance, const std::vector<Turn>& history) const;
  std::vector<DialogAct> parse(std::string_view utterance, const std::vector<Turn>& history) const override;

  void save(const std::filesystem::path& path) const;
  static HcenluModel load(const std::filesystem::path& path);

 private:
  PreparedSequence prepare_sequence(const TokenizedUtterance& tok, EmbedStats* stats) const;
  Forward run(Graph& g, const PreparedExample& ex, bool trainable, Rng* dropout_rng) const;

  HcenluConfig config_;
  BpeCodec codec_;
  std::vector<std::string> labels_;
  std::vector<std::string> tags_;
  std::map<std::string, std::size_t> tag_index_;
  ContextualEmbeddingProvider provider_;

  CharCnnParams cnn_;
  BiLstmParams uu_;
  BiLstmParams dc_;
  BiLstmParams intent_;
  BiLstmParams tag_;
  Parameter M_;
  Parameter W_intent_;
  Parameter b_intent_;
  Parameter W_tag_;
  Parameter b_tag_;
};

/// Gold outcome of an example: its labels, its spans and the acts they decode to.
NluOutcome gold_outcome(const TrainingExample& ex);
NluOutcome predicted_outcome(const NluOutput& out);

NluScores nlu_component_metrics(const HcenluModel& model, const std::vector<TrainingExample>& test);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0;
  NluScores validation;
};

struct TrainReport {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double seconds = 0;
};

/// Builds the inventories and codec from the training data, then trains with
/// ADAM and global-norm clipping. Keeps the parameters of the epoch with the
/// best validation overall F1.
HcenluModel train_hcenlu(const std::vector<TrainingExample>& train, const std::vector<TrainingExample>& validation,
                         const HcenluConfig& config, TrainReport* report = nullptr,
                         ContextualEmbeddingProvider provider = ContextualEmbeddingProvider(0));

/// Trains an existing model in place.
TrainReport fit(HcenluModel& model, const std::vector<TrainingExample>& train,
                const std::vector<TrainingExample>& validation);

}  // namespace hceds
