#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairtext/classifier.h"
#include "fairtext/corpus.h"
#include "fairtext/explainer.h"
#include "fairtext/identifier.h"
#include "fairtext/llm_client.h"
#include "fairtext/moderator.h"

namespace fairtext {

// --- identifier backends -------------------------------------------------------

class Identifier {
 public:
  virtual ~Identifier() = default;
  // One annotation per word, in input order.
  virtual std::vector<Annotation> identify(std::span<const std::string> words) = 0;
  virtual std::string name() const = 0;
};

class DictionaryIdentifier : public Identifier {
 public:
  explicit DictionaryIdentifier(ProtectedDictionary dictionary)
      : dictionary_(std::move(dictionary)) {}
  std::vector<Annotation> identify(std::span<const std::string> words) override;
  std::string name() const override { return "dictionary"; }

 private:
  ProtectedDictionary dictionary_;
};

// Pre-computed annotations (human tallies, expert labels, earlier LLM runs).
// Words without an entry are reported as not protected.
class FixedAnnotationIdentifier : public Identifier {
 public:
  explicit FixedAnnotationIdentifier(std::vector<Annotation> annotations);
  std::vector<Annotation> identify(std::span<const std::string> words) override;
  std::string name() const override { return "annotations"; }

 private:
  std::map<std::string, Annotation> by_word_;
};

// LLM backend; answers are cached per word so repeated measurements only ask
// about new words.
class LlmIdentifier : public Identifier {
 public:
  LlmIdentifier(LlmConfig config, std::shared_ptr<ChatTransport> transport);
  std::vector<Annotation> identify(std::span<const std::string> words) override;
  std::string name() const override { return "llm"; }

 private:
  LlmConfig config_;
  std::shared_ptr<ChatTransport> transport_;
  std::map<std::string, Annotation> cache_;
};

enum class IdentifierBackend { kDictionary, kLlm, kAnnotations };

struct IdentifierSettings {
  IdentifierBackend backend = IdentifierBackend::kDictionary;
  std::filesystem::path dictionary;
  std::filesystem::path annotations;
  LlmConfig llm;
};

IdentifierBackend parse_identifier_backend(const std::string& name);
std::string to_string(IdentifierBackend backend);

// Builds the configured backend; the LLM backend talks HTTP.
std::unique_ptr<Identifier> make_identifier(const IdentifierSettings& settings);

// --- configuration ---------------------------------------------------------------

struct PipelineConfig {
  std::filesystem::path training_corpus;
  std::filesystem::path unlabeled_corpus;
  std::string target_class;
  ExplainerConfig explainer = ExplainerConfig::with_top_k(400);
  IdentifierSettings identifier;
  // Template: protected_words are filled in from the measurement.
  MitigationPlan plan;
  std::filesystem::path embeddings;
  std::filesystem::path hypernyms;
  TrainConfig train;
  std::filesystem::path output_dir;
  // Pre-trained original model; trained from training_corpus when absent.
  std::optional<std::filesystem::path> model;
  // Black-box original classifier: predictions and attributions from files.
  std::optional<std::filesystem::path> external_predictions;
  std::optional<std::filesystem::path> external_attributions;
  int rounds = 1;
  double threshold = 0.5;

  void validate() const;
};

// Reads a JSON document or a TOML-style key/value file (chosen by the ".json"
// extension). Relative paths resolve against the file's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig parse_pipeline_config(std::string_view text, bool is_json,
                                     const std::filesystem::path& base_dir);

// --- measurement and report -------------------------------------------------------

struct FairnessStats {
  std::size_t protected_count = 0;
  std::size_t top_n = 0;
  double percent = 0.0;  // 100 * protected_count / top_n
  std::optional<std::size_t> retained_from_original;

  // "93/400", or "37/400 {16}" when retained_from_original is set.
  std::string ratio() const;
  // Percent rounded to an integer, e.g. "23%".
  std::string percent_label() const;
};

FairnessStats fairness_stats(std::size_t protected_count, std::size_t top_n);

struct StageTimings {
  double train = 0.0;
  double predict = 0.0;
  double explain = 0.0;
  double identify = 0.0;
  double moderate = 0.0;
  double retrain = 0.0;

  double total() const {
    return train + predict + explain + identify + moderate + retrain;
  }
};

struct Measurement {
  std::optional<Metrics> metrics;  // when the unlabeled corpus carries labels
  std::size_t explained_documents = 0;
  std::vector<GlobalWordScore> ranking;
  std::vector<std::string> top_words;
  std::vector<Annotation> annotations;      // one per top word
  std::vector<std::string> protected_words; // top words annotated protected
  FairnessStats fairness;
  StageTimings timings;
  std::vector<std::string> warnings;
};

// Predicts `target_class` over `unlabeled`, explains the positively predicted
// documents, aggregates, selects the top words and annotates them. Throws
// Error when no document is predicted as the target class.
Measurement measure(const LinearModel& model, const LabeledCorpus& unlabeled,
                    const std::string& target_class, const ExplainerConfig& explainer,
                    Identifier& identifier, double threshold = 0.5);

// Same, for a black-box classifier whose predictions and attributions were
// produced elsewhere.
Measurement measure_external(const std::map<std::string, ClassProbabilities>& predictions,
                             std::span<const AttributionRecord> attributions,
                             const LabeledCorpus& unlabeled,
                             const std::string& target_class,
                             const ExplainerConfig& explainer, Identifier& identifier);

Measurement run_measurement(const PipelineConfig& config, Identifier& identifier);

struct MitigationReport {
  std::string target_class;
  MitigationPlan plan;
  std::size_t original_training_size = 0;
  std::size_t mitigated_training_size = 0;
  Measurement original;
  Measurement mitigated;
  MitigationDelta delta;
  int rounds_run = 0;
  std::vector<std::string> warnings;
  StageTimings timings;

  // Annotations consulted across both measurements, first occurrence wins.
  std::vector<Annotation> annotations_used() const;
};

struct MitigationArtifacts {
  LinearModel original_model;
  LinearModel mitigated_model;
  LabeledCorpus mitigated_corpus;
};

// Full loop: measure, moderate, retrain with the same configuration and seed,
// re-measure with the same number of top words.
MitigationReport run_mitigation(const PipelineConfig& config, Identifier& identifier,
                                MitigationArtifacts* artifacts = nullptr);

// Runs the loop and writes report.json, report.txt, timings.json, the ranking
// CSVs, annotations.tsv, mitigated_train.jsonl and the mitigated model under
// config.output_dir.
MitigationReport run_pipeline(const PipelineConfig& config, Identifier& identifier);

// Deterministic JSON rendering (no timings).
std::string report_json(const MitigationReport& report);
// Human-readable summary table (no timings).
std::string report_table(const MitigationReport& report);
std::string timings_json(const MitigationReport& report);

// Overlap between the top words of two measurements; both must use the same
// top_n.
Overlap compare_rankings(const Measurement& run_a, const Measurement& run_b);

}  // namespace fairtext
