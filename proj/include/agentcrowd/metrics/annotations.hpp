#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "agentcrowd/corpus.hpp"
#include "agentcrowd/runner.hpp"

namespace agentcrowd {

struct Annotation {
  std::string rater_id;
  std::string claim_id;
  int truthfulness = 0;  // six-level
  std::optional<std::array<int, kDimensionCount>> dimensions;
};

enum class Provenance { RunLog, HumanCsv, Derived };

// Judgments of one crowd; values always stored on the six-level scale.
struct AnnotationSet {
  std::string crowd;
  Provenance provenance = Provenance::Derived;
  std::vector<Annotation> entries;
  std::size_t missing = 0;  // failed or unusable judgments left out
  std::vector<std::string> warnings;

  // Claim ids with at least one entry, in corpus order.
  std::vector<std::string> claim_ids(const Corpus& corpus) const;
  // Rater ids in first-seen order.
  std::vector<std::string> rater_ids() const;
  std::vector<int> values_for(std::string_view claim_id) const;
};

// Throws RangeError / DuplicateIdError / UnresolvedClaimError.
void validate_annotations(const AnnotationSet& set, const Corpus& corpus);

// Questionnaire records with a parsed reply; failed ones are counted as missing.
AnnotationSet annotations_from_run_log(const RunLog& log, const Corpus& corpus, std::string crowd);

// Columns rater_id, claim_id, truthfulness and optionally the seven
// dimension keys. Throws ParseError / SchemaError / RangeError /
// UnresolvedClaimError.
AnnotationSet annotations_from_csv(const std::filesystem::path& path, const Corpus& corpus, std::string crowd);
AnnotationSet annotations_from_csv_text(std::string_view text, const Corpus& corpus, std::string crowd);

}  // namespace agentcrowd
