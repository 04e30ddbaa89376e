#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "agentcrowd/corpus.hpp"
#include "agentcrowd/crowd.hpp"

namespace agentcrowd {

enum class Role { System, User };

std::string_view role_name(Role r);

struct PromptText {
  Role role = Role::User;
  std::string text;

  bool operator==(const PromptText&) const = default;
};

// Variable names substituted into the templates; rendered text never
// contains "{name}" for any of them.
std::span<const std::string_view> template_variables();
bool has_placeholder_leak(std::string_view text);

// Persona system prompt. Unspecified traits are rendered as neutral phrases.
// Throws MissingFieldError on blank fields.
PromptText render_system_prompt(const AgentProfile& profile);

// Phase 1: candidates enumerated in corpus order with 1-based indices.
// Throws NoEvidenceError on an empty list or a candidate with a blank url.
PromptText render_evidence_prompt(const Claim& claim, std::span<const EvidencePage> candidates);

// Phase 2. Without a summary the article block is dropped and the wording
// asks for a judgment from the agent's own knowledge.
PromptText render_questionnaire_prompt(const Claim& claim, const std::optional<std::string>& evidence_summary);

inline constexpr std::size_t kDefaultSegmentChars = 12000;

// Page summarization prompt; text longer than `segment_chars` is split into
// labelled segments. Throws EmptyTextError on blank text.
PromptText render_summary_prompt(const Claim& claim, std::string_view page_text,
                                 std::size_t segment_chars = kDefaultSegmentChars);

// First balanced top-level JSON object in `raw` that parses, skipping
// surrounding prose and Markdown fences.
std::optional<nlohmann::json> extract_json_object(std::string_view raw);

struct EvidenceChoice {
  std::size_t index = 0;  // position in the candidate list
  std::string url;
  std::string title;
  std::string snippet;

  bool operator==(const EvidenceChoice&) const = default;
};

// Throws JsonError / MissingFieldError / UnknownUrlError.
EvidenceChoice parse_evidence_choice(std::string_view raw, std::span<const EvidencePage> candidates);

// "completely agree" for 2 ... "completely disagree" for -2.
std::string_view agreement_meaning(int value);

struct DimensionRating {
  int value = 0;  // -2..2
  std::string meaning;
  std::string reason;

  bool operator==(const DimensionRating&) const = default;
};

struct QuestionnaireResponse {
  std::array<DimensionRating, kDimensionCount> dimensions{};
  TruthLevel truthfulness = TruthLevel::PantsOnFire;
  std::string truthfulness_meaning;
  std::string truthfulness_reason;
  // Value/meaning disagreements resolved in favour of the value.
  std::vector<std::string> warnings;

  const DimensionRating& operator[](QualityDimension d) const { return dimensions[static_cast<std::size_t>(d)]; }
  DimensionRating& operator[](QualityDimension d) { return dimensions[static_cast<std::size_t>(d)]; }

  bool operator==(const QuestionnaireResponse&) const = default;
};

// Throws JsonError / MissingFieldError / RangeError.
QuestionnaireResponse parse_questionnaire(std::string_view raw);
QuestionnaireResponse questionnaire_from_json(const nlohmann::json& obj);

// The 24-field reply shape the questionnaire prompt asks for.
nlohmann::json questionnaire_to_json(const QuestionnaireResponse& r);

}  // namespace agentcrowd
