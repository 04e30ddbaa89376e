#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace agentcrowd {

// Six-level expert truthfulness scale. Numeric codes match the
// questionnaire prompt.
enum class TruthLevel : int {
  PantsOnFire = 0,
  False = 1,
  MostlyFalse = 2,
  HalfTrue = 3,
  MostlyTrue = 4,
  True = 5,
};

enum class TwoLevel : int { False = 0, True = 1 };

inline constexpr int kTruthLevelCount = 6;

constexpr int to_int(TruthLevel l) { return static_cast<int>(l); }
constexpr int to_int(TwoLevel l) { return static_cast<int>(l); }

std::string_view truth_level_name(TruthLevel level);
std::string_view two_level_name(TwoLevel level);
std::optional<TruthLevel> truth_level_from_int(long long value);
// Accepts the canonical names case-insensitively, with spaces, hyphens
// or underscores as separators ("Pants on Fire", "mostly_true").
std::optional<TruthLevel> truth_level_from_name(std::string_view name);

// {Pants-On-Fire, False, Mostly-False} -> False; the rest -> True.
constexpr TwoLevel map_to_two_level(TruthLevel level) {
  return to_int(level) <= to_int(TruthLevel::MostlyFalse) ? TwoLevel::False : TwoLevel::True;
}

enum class QualityDimension : int {
  Accuracy = 0,
  Unbiasedness,
  Comprehensibility,
  Precision,
  Completeness,
  SpeakersTrustworthiness,
  Informativeness,
};

inline constexpr int kDimensionCount = 7;

inline constexpr std::array<QualityDimension, kDimensionCount> kAllDimensions = {
    QualityDimension::Accuracy,          QualityDimension::Unbiasedness,
    QualityDimension::Comprehensibility, QualityDimension::Precision,
    QualityDimension::Completeness,      QualityDimension::SpeakersTrustworthiness,
    QualityDimension::Informativeness,
};

// snake_case key used as the JSON field prefix ("speakers_trustworthiness").
std::string_view dimension_key(QualityDimension d);
// Human-readable label ("Speaker's Trustworthiness").
std::string_view dimension_label(QualityDimension d);
std::optional<QualityDimension> dimension_from_key(std::string_view key);

using Date = std::chrono::year_month_day;

// Strict YYYY-MM-DD.
std::optional<Date> parse_iso_date(std::string_view text);
std::string format_iso_date(const Date& d);

struct EvidencePage {
  std::string url;
  std::string title;
  std::string snippet;
  std::optional<std::string> page_text;
  std::optional<std::string> summary;

  bool operator==(const EvidencePage&) const = default;
};

struct Claim {
  std::string id;
  std::string text;
  std::string speaker;
  Date date{};
  std::string topic;
  TruthLevel ground_truth = TruthLevel::PantsOnFire;
  std::vector<EvidencePage> evidence;

  bool operator==(const Claim&) const = default;
};

struct CorpusMetadata {
  std::string name;
  Date date_from{};
  Date date_to{};
  std::vector<std::string> topics;
  std::vector<std::string> notes;

  bool operator==(const CorpusMetadata&) const = default;
};

struct Corpus {
  CorpusMetadata metadata;
  std::vector<Claim> claims;

  const Claim* find(std::string_view claim_id) const;
  bool operator==(const Corpus&) const = default;
};

// Throws SchemaError / DuplicateIdError / UnknownTopicError.
Corpus corpus_from_json(const nlohmann::json& doc);
nlohmann::json corpus_to_json(const Corpus& corpus);

// Throws ParseError on unreadable or malformed JSON, otherwise as corpus_from_json.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Canonical serialization; stable across load/save round trips.
std::string corpus_canonical_text(const Corpus& corpus);
std::string corpus_digest(const Corpus& corpus);

struct CorpusFilter {
  std::vector<std::string> topics;  // empty: any topic
  std::optional<Date> date_from;    // inclusive
  std::optional<Date> date_to;      // inclusive

  std::string describe() const;
};

// Keeps claim order. Throws UnknownTopicError for undeclared topics.
Corpus filter_corpus(const Corpus& corpus, const CorpusFilter& filter);

struct SyntheticCorpusOptions {
  std::string name = "synthetic-2022";
  // Topic label and claim count, in order.
  std::vector<std::pair<std::string, int>> topics = {
      {"Civil Rights", 17}, {"Conspiracy Theories", 25}, {"Economics", 28}};
  int pages_per_claim = 10;
  int year = 2022;
  bool with_summaries = true;
  std::uint64_t seed = 2022;
};

// Fixture corpus with level-balanced ground truth (levels cycle 0..5 in a
// seeded order) and pre-extracted page text for every evidence page.
Corpus synthetic_corpus(const SyntheticCorpusOptions& options = {});

}  // namespace agentcrowd
