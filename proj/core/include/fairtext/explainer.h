#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairtext/classifier.h"
#include "fairtext/corpus.h"

namespace fairtext {

struct TokenScore {
  std::size_t position = 0;
  std::string token;
  double score = 0.0;

  bool operator==(const TokenScore&) const = default;
};

// Local explanation: one score per token position of a document.
struct AttributionRecord {
  std::string document_id;
  std::string target_class;
  std::vector<TokenScore> token_scores;

  bool operator==(const AttributionRecord&) const = default;
};

struct GlobalWordScore {
  std::string word;
  double total = 0.0;
  std::size_t frequency = 0;
  double score = 0.0;  // total / frequency

  bool operator==(const GlobalWordScore&) const = default;
};

enum class AttributionMethod { kLinearExact, kOcclusion, kExternalFile };

std::string to_string(AttributionMethod method);
AttributionMethod parse_attribution_method(const std::string& name);

struct ExplainerConfig {
  AttributionMethod method = AttributionMethod::kLinearExact;
  std::optional<std::size_t> top_k;
  std::optional<double> top_fraction;

  static ExplainerConfig with_top_k(std::size_t k,
                                    AttributionMethod m = AttributionMethod::kLinearExact);
  static ExplainerConfig with_top_fraction(
      double fraction, AttributionMethod m = AttributionMethod::kLinearExact);

  // Exactly one of top_k / top_fraction, k >= 1, fraction in (0, 1].
  void validate() const;
  // Number of words selected out of `available` distinct words.
  std::size_t resolve_count(std::size_t available) const;
};

// Each occurrence scores the model weight of its token for `target_class`.
AttributionRecord attribute_linear(const LinearModel& model, const Document& doc,
                                   const std::string& target_class);

// Score at position i is p(target | doc) - p(target | doc without token i).
AttributionRecord attribute_occlusion(const PredictFn& predict_fn,
                                      const Document& doc,
                                      const std::string& target_class);

struct AttributionFileError {
  std::size_t line = 0;
  std::string document_id;
  std::string message;
};

struct ExternalAttributions {
  std::vector<AttributionRecord> records;
  std::vector<AttributionFileError> errors;
};

// JSONL records {"id", "target_class", "scores": [[position, token, score]]},
// validated against the token sequences of `corpus`. Invalid records are
// reported in `errors` and skipped.
ExternalAttributions load_external_attributions(
    const std::filesystem::path& path, const LabeledCorpus& corpus);
void save_attributions(std::span<const AttributionRecord> records,
                       const std::filesystem::path& path);

// Sum of each word's occurrence scores divided by its occurrence count,
// ordered by descending score with ties broken lexicographically. The result
// does not depend on record order. Throws ValidationError when records mix
// target classes.
std::vector<GlobalWordScore> aggregate_global(
    std::span<const AttributionRecord> records);

std::vector<std::string> select_top(std::span<const GlobalWordScore> scores,
                                    const ExplainerConfig& config);

void save_ranking_csv(std::span<const GlobalWordScore> scores,
                      const std::filesystem::path& path);
std::vector<GlobalWordScore> load_ranking_csv(const std::filesystem::path& path);

struct AblationPoint {
  std::size_t words_removed = 0;
  double f1 = 0.0;  // macro F1
  Metrics metrics;
};

// Evaluates `model` on `corpus` with the top-s ranked words deleted from every
// document, for each s in `steps` (ascending; clamped to the ranking length).
std::vector<AblationPoint> ablation_curve(const LinearModel& model,
                                          const LabeledCorpus& corpus,
                                          std::span<const std::string> ranked_words,
                                          std::span<const std::size_t> steps);

struct Overlap {
  std::size_t count = 0;
  double fraction = 0.0;
};

// |set(a) ∩ set(b)| and that count over max(|a|, |b|). Two empty lists are
// identical and overlap fully.
Overlap overlap(std::span<const std::string> list_a,
                std::span<const std::string> list_b);

enum class RenderFormat { kAnsi, kHtml };

// Tokens styled by sign (red positive, blue negative) with intensity
// proportional to |score| / max |score|. Zero-score tokens are unstyled.
std::string render_attributions(const AttributionRecord& record,
                                RenderFormat format);

// Number of intensity levels used by the ANSI renderer.
inline constexpr int kRenderLevels = 5;

}  // namespace fairtext
