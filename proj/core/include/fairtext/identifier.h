#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fairtext {

// The nine protected categories of the Equality Act 2010, in their canonical
// (and lexicographic) order.
enum class ProtectedCategory {
  kAge,
  kDisability,
  kGenderReassignment,
  kMarriageCivilPartnership,
  kPregnancyMaternity,
  kRace,
  kReligionBelief,
  kSex,
  kSexualOrientation,
};

inline constexpr std::size_t kNumCategories = 9;
inline constexpr std::array<ProtectedCategory, kNumCategories> kAllCategories = {
    ProtectedCategory::kAge,
    ProtectedCategory::kDisability,
    ProtectedCategory::kGenderReassignment,
    ProtectedCategory::kMarriageCivilPartnership,
    ProtectedCategory::kPregnancyMaternity,
    ProtectedCategory::kRace,
    ProtectedCategory::kReligionBelief,
    ProtectedCategory::kSex,
    ProtectedCategory::kSexualOrientation,
};

// Snake-case identifier, e.g. "religion_belief".
std::string_view category_id(ProtectedCategory c);
// Human-readable name as used in the LLM protocol, e.g. "Religion and belief".
std::string_view category_display_name(ProtectedCategory c);
// Accepts identifiers and display names case-insensitively, with "and"/"or"
// and "_"/" " interchangeable. Returns nullopt for anything else.
std::optional<ProtectedCategory> parse_category(std::string_view text);

enum class AnnotationSource { kDictionary, kLlm, kHuman, kExpert };

std::string_view to_string(AnnotationSource source);
AnnotationSource parse_annotation_source(std::string_view text);

struct Annotation {
  std::string word;
  std::optional<ProtectedCategory> category;  // nullopt: not protected
  int reliability = 0;                         // [0, 100]
  std::string explanation;
  AnnotationSource source = AnnotationSource::kDictionary;
  // Plurality tie between categories, resolved to the first one.
  bool flagged = false;
  // The backend could not produce an answer; never counts as protected.
  bool failed = false;

  bool is_protected() const { return category.has_value() && !failed; }
  bool operator==(const Annotation&) const = default;
};

// Annotation TSV: word \t category|none \t reliability \t source.
void save_annotations(std::span<const Annotation> annotations,
                      const std::filesystem::path& path);
std::vector<Annotation> load_annotations(const std::filesystem::path& path);
// Same format from a stream; `name` prefixes error messages.
std::vector<Annotation> read_annotations(std::istream& in, const std::string& name);

// --- dictionary backend ----------------------------------------------------

using ProtectedDictionary = std::map<std::string, ProtectedCategory>;

// Lexicon TSV rows: word \t category [\t score]. Words are case-folded.
ProtectedDictionary load_dictionary(const std::filesystem::path& path);

std::vector<Annotation> identify_dictionary(std::span<const std::string> words,
                                            const ProtectedDictionary& dictionary);

// --- LLM reply protocol ------------------------------------------------------

struct LlmReply {
  std::optional<ProtectedCategory> category;
  int reliability = 0;
  std::string explanation;

  bool operator==(const LlmReply&) const = default;
};

// "Category | score | explanation" with exactly two '|'. Throws
// ValidationError on a wrong part count, unknown category or a score outside
// [0, 100].
LlmReply parse_llm_reply(std::string_view reply);
// Inverse of parse_llm_reply for explanations without '|'.
std::string format_llm_reply(const LlmReply& reply);

// --- human annotation ------------------------------------------------------

enum class TrapBand { kLow, kHigh };

struct TrapItem {
  std::string word;
  TrapBand expected_band = TrapBand::kLow;
};

// Trap TSV rows: word \t low|high.
std::vector<TrapItem> load_traps(const std::filesystem::path& path);

// Whether a Likert answer (1-5) lies in the band: low = {1, 2}, high = {4, 5}.
bool in_band(int likert, TrapBand band);

enum class SessionVerdict { kReliable, kRejected };

// A session is reliable iff every trap is answered inside its band. Throws
// ValidationError when a trap has no answer or an answer is outside 1-5.
SessionVerdict trap_filter(std::span<const std::pair<std::string, int>> session,
                           std::span<const TrapItem> traps);

struct VoteSheet {
  std::string word;
  std::array<int, kNumCategories> category_votes{};
  int none_of_the_above = 0;

  int category_total() const;
  int total() const { return category_total() + none_of_the_above; }
  void add(std::optional<ProtectedCategory> choice, int count = 1);
};

// Protected iff category votes strictly exceed "none of the above"; category is
// the plurality one (first in canonical order on ties, flagged). Reliability
// is the winning side's share of all votes, in percent.
Annotation majority_vote(const VoteSheet& sheet,
                         AnnotationSource source = AnnotationSource::kHuman);

// --- agreement ---------------------------------------------------------------

// Cohen's kappa on the binary protected/not variable. Both maps must cover the
// same words (at least two). Returns 1.0 when chance agreement is 1.
double cohen_kappa(const std::map<std::string, bool>& a,
                   const std::map<std::string, bool>& b);

// Cohen's kappa over arbitrary nominal labels.
double cohen_kappa_nominal(const std::map<std::string, std::string>& a,
                           const std::map<std::string, std::string>& b);

std::map<std::string, bool> protected_map(std::span<const Annotation> annotations);

}  // namespace fairtext
