#include "agentcrowd/prompts.hpp"

#include <algorithm>
#include <cmath>

#include "agentcrowd/error.hpp"
#include "agentcrowd/util.hpp"

namespace agentcrowd {

using nlohmann::json;

namespace {

constexpr std::string_view kSystemTemplate =
    "You are a participant in a crowd-based fact-checking program, where your role is to critically evaluate "
    "information and statements, and assess its accuracy.\n"
    "\n"
    "As a {age} year old {gender} of {ethnicity} ethnicity, you bring a unique perspective to this program.\n"
    "\n"
    "You were born in {birth_country} and currently reside in {residence_country}.\n"
    "\n"
    "In terms of political alignment, you identify as a {political_party} with generally {political_views} views.\n"
    "\n"
    "Your highest level of education is {education_level}, and your annual family income last year was in the "
    "range {income_range}.\n"
    "\n"
    "Your views on environmental policies reflect that you {climate_change_stance} government action to prevent "
    "climate change. Regarding the proposal to build a wall along the southern border, you {border_wall_stance}.\n"
    "\n"
    "You are fluent in {languages} and you {student_status} a student.\n"
    "\n"
    "Your current employment status is {employment_status}.\n"
    "\n"
    "Use your background, perspectives, and skills to contribute thoughtfully and objectively to this "
    "fact-checking program.";

constexpr std::string_view kEvidenceHead =
    "You are a participant in a crowd-based fact-checking program, tasked with verifying the truthfulness of the "
    "following statement:\n"
    "\n";

constexpr std::string_view kEvidenceListIntro =
    "Below is a collection of URLs, titles, and snippets of web pages that are relevant to the statement:\n"
    "\n";

constexpr std::string_view kEvidenceTail =
    "Your goal is to carefully evaluate these sources, considering relevance, credibility, and depth of "
    "information, and select a single evidence that is, according to you, the most appropriate to verify the "
    "statement.\n"
    "\n"
    "As a participant with your unique perspective, use your knowledge and background to inform your selection.\n"
    "\n"
    "Provide your response strictly in JSON format with the following fields:\n"
    "{\n"
    "  \"url\": \"selected URL\",\n"
    "  \"title\": \"title of the selected page\",\n"
    "  \"snippet\": \"snippet of the selected page\"\n"
    "}\n"
    "\n"
    "Each field must be enclosed in double quotes. Ensure that all values are properly escaped if necessary. Do "
    "not include additional text, explanations, or comments outside of the JSON object.";

constexpr std::array<std::string_view, kDimensionCount> kMetricDescriptions = {
    "ACCURACY: Assess if the statement accurately reflects the topic without errors or incorrect information;",
    "UNBIASEDNESS: Determine if the statement is neutrally and objectively expressed, avoiding subjective or "
    "biased language;",
    "COMPREHENSIBILITY: Rate the statement’s clarity and readability, determining if it is easy to "
    "understand;",
    "PRECISION: Evaluate whether the information in the statement is specific and detailed rather than vague or "
    "ambiguous;",
    "COMPLETENESS: Assess if the statement provides a full, comprehensive view of the topic, rather than only "
    "partial information;",
    "SPEAKER'S TRUSTWORTHINESS: Rate the general trustworthiness of the speaker or author, based on reliability "
    "and credibility;",
    "INFORMATIVENESS: Judge if the statement provides valuable information or insights, rather than well-known "
    "facts or tautologies.",
};

constexpr std::array<std::string_view, kTruthLevelCount> kTruthDescriptions = {
    "0 = Pants-On-Fire (If the statement is NOT accurate or is NOT correct but also makes a ridiculous claim).",
    "1 = False (If the statement is NOT accurate or is NOT correct);",
    "2 = Mostly-False (If the statement contains an element of truth but ignores critical facts that would give "
    "a different impression);",
    "3 = Half-True (If the statement is partially accurate but leaves out important details or takes things out "
    "of context);",
    "4 = Mostly-True (If the statement is accurate but needs clarification or additional information);",
    "5 = True (If the statement is accurate and there’s nothing significant missing);",
};

constexpr std::array<std::string_view, 5> kAgreement = {
    "completely disagree", "partially disagree", "neutral", "partially agree", "completely agree"};

constexpr std::array<std::string_view, 16> kVariables = {
    "age",          "gender",           "ethnicity",     "birth_country",     "residence_country", "political_party",
    "political_views", "education_level", "income_range", "climate_change_stance", "border_wall_stance",
    "languages",    "student_status",   "employment_status", "statement",    "summary"};

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string join_natural(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += (i + 1 == items.size()) ? " and " : ", ";
    out += items[i];
  }
  return out;
}

std::string stance_phrase(std::string_view stance, bool border) {
  if (stance == "Support") return border ? "support it" : "support";
  if (stance == "Oppose") return border ? "oppose it" : "oppose";
  if (stance == "Neutral") return border ? "are neutral about it" : "are neutral towards";
  return to_lower(stance);
}

std::string statement_block(const Claim& claim) {
  return "\"" + claim.text + "\"\nSpeaker: " + claim.speaker + "\nDate: " + format_iso_date(claim.date);
}

bool starts_with_vowel(std::string_view s) {
  return !s.empty() && std::string_view("AEIOUaeiou").find(s.front()) != std::string_view::npos;
}

std::string field_list() {
  std::string out = "{\n";
  for (auto d : kAllDimensions) {
    const std::string key(dimension_key(d));
    out += "  \"" + key + "_value\": (an integer that can be either -2 or -1 or 0 or 1 or 2);\n";
    out += "  \"" + key +
           "_meaning\": (a string that can only be either \"completely agree\" or \"partially agree\" or "
           "\"neutral\" or \"partially disagree\" or \"completely disagree\");\n";
    out += "  \"" + key + "_reason\": (your justification of the value assigned to the metric of " +
           to_lower(dimension_label(d)) + " for the current statement, as a string enclosed in double quotes);\n";
  }
  out += "  \"truthfulness_value\": (an integer that can be either 0 or 1 or 2 or 3 or 4 or 5);\n";
  out +=
      "  \"truthfulness_meaning\": (a string that can only be either \"True\" or \"Mostly-True\" or \"Half-True\" "
      "or \"Mostly-False\" or \"False\" or \"Pants-On-Fire\");\n";
  out +=
      "  \"truthfulness_reason\": (your justification of the value assigned to the metric of truthfulness for "
      "the current statement, as a string enclosed in double quotes)\n";
  out += "}";
  return out;
}

// Position just past a UTF-8 boundary at or before `pos`.
std::size_t utf8_floor(std::string_view s, std::size_t pos) {
  while (pos > 0 && pos < s.size() && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) --pos;
  return pos;
}

std::vector<std::string_view> split_segments(std::string_view text, std::size_t max_chars) {
  std::vector<std::string_view> out;
  while (text.size() > max_chars) {
    std::size_t cut = text.rfind(' ', max_chars);
    if (cut == std::string_view::npos || cut < max_chars / 2) cut = utf8_floor(text, max_chars);
    if (cut == 0) cut = max_chars;
    out.push_back(text.substr(0, cut));
    text.remove_prefix(cut);
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  }
  if (!text.empty()) out.push_back(text);
  return out;
}

long long integer_field(const json& obj, const std::string& key) {
  if (!obj.contains(key)) throw MissingFieldError("missing field \"" + key + "\"");
  const auto& v = obj.at(key);
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d)) return static_cast<long long>(d);
  }
  if (v.is_string()) {
    const auto s = trim(v.get<std::string>());
    std::size_t used = 0;
    try {
      const long long x = std::stoll(s, &used);
      if (used == s.size()) return x;
    } catch (const std::exception&) {
    }
  }
  throw RangeError("field \"" + key + "\" must be an integer, got " + v.dump());
}

std::string string_field(const json& obj, const std::string& key) {
  if (!obj.contains(key)) throw MissingFieldError("missing field \"" + key + "\"");
  const auto& v = obj.at(key);
  if (!v.is_string()) throw MissingFieldError("field \"" + key + "\" must be a string");
  return v.get<std::string>();
}

}  // namespace

std::string_view role_name(Role r) { return r == Role::System ? "system" : "user"; }

std::span<const std::string_view> template_variables() { return kVariables; }

bool has_placeholder_leak(std::string_view text) {
  for (auto v : kVariables) {
    if (text.find("{" + std::string(v) + "}") != std::string_view::npos) return true;
  }
  return text.find("{web_page_text}") != std::string_view::npos || text.find("{claim}") != std::string_view::npos ||
         text.find("{evidences_list}") != std::string_view::npos;
}

PromptText render_system_prompt(const AgentProfile& profile) {
  for (const auto& info : all_traits()) {
    if (is_blank(profile.get(info.trait))) {
      throw MissingFieldError("profile " + profile.agent_id + ": field '" + std::string(info.key) + "' is blank");
    }
  }
  std::string text(kSystemTemplate);
  auto unspecified = [](std::string_view v) { return v == kUnspecified; };

  // Neutral rewrites for unspecified traits.
  if (unspecified(profile.age_band)) replace_all(text, "{age} year old ", "");
  if (unspecified(profile.gender)) replace_all(text, "{gender}", "person");
  if (unspecified(profile.ethnicity)) replace_all(text, " of {ethnicity} ethnicity", "");
  if (unspecified(profile.birth_country)) replace_all(text, "{birth_country}", "an undisclosed country");
  if (unspecified(profile.residence_country)) replace_all(text, "{residence_country}", "an undisclosed country");
  if (unspecified(profile.political_party)) {
    replace_all(text, "a {political_party}", "someone with no stated party affiliation");
  } else if (starts_with_vowel(profile.political_party)) {
    replace_all(text, "a {political_party}", "an {political_party}");
  }
  if (unspecified(profile.political_views)) {
    replace_all(text, " with generally {political_views} views", " with no stated political views");
  }
  if (unspecified(profile.education_level)) replace_all(text, "{education_level}", "undisclosed");
  if (unspecified(profile.income_range)) replace_all(text, "in the range {income_range}", "in an undisclosed range");
  if (unspecified(profile.climate_change_stance)) {
    replace_all(text, "you {climate_change_stance} government action", "you have no stated position on government action");
  }
  if (unspecified(profile.border_wall_stance)) replace_all(text, "you {border_wall_stance}.", "you have no stated position.");
  if (profile.languages.size() == 1 && unspecified(profile.languages.front())) {
    replace_all(text, "{languages}", "your native language");
  }
  if (unspecified(profile.student_status)) {
    replace_all(text, "and you {student_status} a student", "and your student status is undisclosed");
  }
  if (unspecified(profile.employment_status)) replace_all(text, "{employment_status}", "undisclosed");

  std::string student = profile.student_status;
  if (student.rfind("You ", 0) == 0) student = student.substr(4);

  replace_all(text, "{age}", profile.age_band);
  replace_all(text, "{gender}", profile.gender);
  replace_all(text, "{ethnicity}", profile.ethnicity);
  replace_all(text, "{birth_country}", profile.birth_country);
  replace_all(text, "{residence_country}", profile.residence_country);
  replace_all(text, "{political_party}", profile.political_party);
  replace_all(text, "{political_views}", profile.political_views);
  replace_all(text, "{education_level}", profile.education_level);
  replace_all(text, "{income_range}", profile.income_range);
  replace_all(text, "{climate_change_stance}", stance_phrase(profile.climate_change_stance, false));
  replace_all(text, "{border_wall_stance}", stance_phrase(profile.border_wall_stance, true));
  replace_all(text, "{languages}", join_natural(profile.languages));
  replace_all(text, "{student_status}", student);
  replace_all(text, "{employment_status}", profile.employment_status);
  return {Role::System, std::move(text)};
}

PromptText render_evidence_prompt(const Claim& claim, std::span<const EvidencePage> candidates) {
  if (candidates.empty()) throw NoEvidenceError("claim " + claim.id + ": no evidence candidates");
  std::string list;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& p = candidates[i];
    if (is_blank(p.url)) throw NoEvidenceError("claim " + claim.id + ": candidate " + std::to_string(i + 1) + " has no url");
    if (i > 0) list += "\n\n";
    list += std::to_string(i + 1) + ". URL: " + p.url + "\n   Title: " + p.title + "\n   Snippet: " + p.snippet;
  }
  std::string text;
  text += kEvidenceHead;
  text += statement_block(claim);
  text += "\n\n";
  text += kEvidenceListIntro;
  text += list;
  text += "\n\n";
  text += kEvidenceTail;
  return {Role::User, std::move(text)};
}

PromptText render_questionnaire_prompt(const Claim& claim, const std::optional<std::string>& evidence_summary) {
  const bool with_article = evidence_summary.has_value();
  std::string text;
  if (with_article) {
    text +=
        "Your task is to assess 8 metrics for the given statement, using both the statement itself and the "
        "provided article, which addresses the same topic.\n";
  } else {
    text += "Your task is to assess 8 metrics for the given statement, using the statement itself and your own knowledge.\n";
  }
  text += "The statement to evaluate is:\n\n";
  text += statement_block(claim);
  text += "\n\n";
  if (with_article) {
    text += "Related Article:\n\n";
    text += *evidence_summary;
    text += "\n\n";
    text += "Using the article as context to better understand and assess the statement, evaluate each of the "
            "following metrics.";
  } else {
    text += "Relying only on your own knowledge to assess the statement, evaluate each of the following metrics.";
  }
  text += " Provide a numerical score, the associated meaning, and a concise 3-4 sentence explanation "
          "(“reason”) for each choice.\n\nMetrics:\n";
  for (std::size_t i = 0; i < kMetricDescriptions.size(); ++i) {
    text += std::to_string(i + 1) + ". " + std::string(kMetricDescriptions[i]) + "\n";
  }
  text += "\nValues for Metrics 1-7:\n";
  for (int v = 2; v >= -2; --v) {
    text += "- " + std::to_string(v) + " = " + std::string(agreement_meaning(v)) + (v == -2 ? ".\n" : ";\n");
  }
  text += "\n8. TRUTHFULNESS: Assess the statement’s proximity to the truth based on available information";
  text += with_article ? ", including the article.\n" : ".\n";
  text += "\nValues for Truthfulness:\n";
  for (int v = kTruthLevelCount - 1; v >= 0; --v) {
    text += "- " + std::string(kTruthDescriptions[static_cast<std::size_t>(v)]) + "\n";
  }
  text += "\nProvide the output strictly in JSON format with the following fields:\n";
  text += field_list();
  text += "\n\nEach field should be filled according to the evaluation criteria above. Please provide accurate "
          "justifications based on ";
  text += with_article ? "both the statement and the article content." : "the statement and your own knowledge.";
  text += " Remember your response must only be a valid JSON object, do not add anything else.";
  return {Role::User, std::move(text)};
}

PromptText render_summary_prompt(const Claim& claim, std::string_view page_text, std::size_t segment_chars) {
  if (is_blank(page_text)) throw EmptyTextError("claim " + claim.id + ": page text is empty");
  if (segment_chars == 0) segment_chars = kDefaultSegmentChars;
  std::string text =
      "You are a model specialized in producing accurate and concise summaries. You are provided with text that "
      "may contain unclean characters or irrelevant fragments automatically extracted from web pages using "
      "BeautifulSoup—such as advertisements or unrelated metadata. Disregard such elements and focus "
      "exclusively on the relevant content.\n"
      "\n"
      "Note: The input text may be split into multiple segments.\n"
      "\n"
      "Summary Guidelines:\n"
      "- Language: The summary must be written in ENGLISH.\n"
      "- Accuracy: Ensure the summary faithfully represents the content of the provided text.\n"
      "- Completeness: Include all relevant elements that support or refute the claim. Do not omit significant "
      "details.\n"
      "- Factuality: Base your summary solely on the information contained in the input text. Do not rely on "
      "assumptions or external knowledge.\n"
      "- Response Format: Return only the summary as your output, with no additional comments or explanations.\n"
      "\n"
      "Reference Statement: ";
  text += claim.text;
  text += "\n\nText to Summarize: ";
  const auto trimmed = trim(page_text);
  const auto segments = split_segments(trimmed, segment_chars);
  if (segments.size() == 1) {
    text += segments.front();
  } else {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      text += "\n\n[Segment " + std::to_string(i + 1) + " of " + std::to_string(segments.size()) + "]\n";
      text += segments[i];
    }
  }
  return {Role::User, std::move(text)};
}

std::optional<json> extract_json_object(std::string_view raw) {
  for (std::size_t start = raw.find('{'); start != std::string_view::npos; start = raw.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
      const char c = raw[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          auto parsed = json::parse(raw.substr(start, i - start + 1), nullptr, false);
          if (!parsed.is_discarded() && parsed.is_object()) return parsed;
          break;
        }
      }
    }
  }
  return std::nullopt;
}

EvidenceChoice parse_evidence_choice(std::string_view raw, std::span<const EvidencePage> candidates) {
  auto obj = extract_json_object(raw);
  if (!obj) throw JsonError("reply contains no parseable JSON object");
  if (!obj->contains("url")) throw MissingFieldError("missing field \"url\"");
  if (!obj->at("url").is_string()) throw MissingFieldError("field \"url\" must be a string");
  const auto url = trim(obj->at("url").get<std::string>());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].url == url) {
      return {i, candidates[i].url, candidates[i].title, candidates[i].snippet};
    }
  }
  throw UnknownUrlError("url \"" + url + "\" is not one of the listed candidates");
}

std::string_view agreement_meaning(int value) {
  if (value < -2 || value > 2) throw RangeError("agreement value " + std::to_string(value) + " is outside -2..2");
  return kAgreement[static_cast<std::size_t>(value + 2)];
}

QuestionnaireResponse questionnaire_from_json(const json& obj) {
  if (!obj.is_object()) throw JsonError("questionnaire reply is not a JSON object");
  QuestionnaireResponse r;
  for (auto d : kAllDimensions) {
    const std::string key(dimension_key(d));
    const auto value = integer_field(obj, key + "_value");
    if (value < -2 || value > 2) {
      throw RangeError("field \"" + key + "_value\" = " + std::to_string(value) + " is outside -2..2");
    }
    auto& rating = r[d];
    rating.value = static_cast<int>(value);
    rating.meaning = string_field(obj, key + "_meaning");
    rating.reason = string_field(obj, key + "_reason");
    if (to_lower(trim(rating.meaning)) != agreement_meaning(rating.value)) {
      r.warnings.push_back(key + ": value " + std::to_string(rating.value) + " disagrees with meaning \"" +
                           rating.meaning + "\"; keeping the value");
    }
  }
  const auto tv = integer_field(obj, "truthfulness_value");
  auto level = truth_level_from_int(tv);
  if (!level) throw RangeError("field \"truthfulness_value\" = " + std::to_string(tv) + " is outside 0..5");
  r.truthfulness = *level;
  r.truthfulness_meaning = string_field(obj, "truthfulness_meaning");
  r.truthfulness_reason = string_field(obj, "truthfulness_reason");
  if (truth_level_from_name(r.truthfulness_meaning) != level) {
    r.warnings.push_back("truthfulness: value " + std::to_string(tv) + " disagrees with meaning \"" +
                         r.truthfulness_meaning + "\"; keeping the value");
  }
  return r;
}

QuestionnaireResponse parse_questionnaire(std::string_view raw) {
  auto obj = extract_json_object(raw);
  if (!obj) throw JsonError("reply contains no parseable JSON object");
  return questionnaire_from_json(*obj);
}

json questionnaire_to_json(const QuestionnaireResponse& r) {
  json j = json::object();
  for (auto d : kAllDimensions) {
    const std::string key(dimension_key(d));
    j[key + "_value"] = r[d].value;
    j[key + "_meaning"] = r[d].meaning;
    j[key + "_reason"] = r[d].reason;
  }
  j["truthfulness_value"] = to_int(r.truthfulness);
  j["truthfulness_meaning"] = r.truthfulness_meaning;
  j["truthfulness_reason"] = r.truthfulness_reason;
  return j;
}

}  // namespace agentcrowd
