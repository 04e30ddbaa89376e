#include "agentcrowd/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <unordered_set>

#include "agentcrowd/error.hpp"
#include "agentcrowd/util.hpp"

namespace agentcrowd {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kTruthLevelCount> kLevelNames = {
    "Pants-On-Fire", "False", "Mostly-False", "Half-True", "Mostly-True", "True"};

constexpr std::array<std::string_view, kDimensionCount> kDimensionKeys = {
    "accuracy",     "unbiasedness",             "comprehensibility", "precision",
    "completeness", "speakers_trustworthiness", "informativeness"};

constexpr std::array<std::string_view, kDimensionCount> kDimensionLabels = {
    "Accuracy",     "Unbiasedness",              "Comprehensibility", "Precision",
    "Completeness", "Speaker's Trustworthiness", "Informativeness"};

std::string normalize_level_name(std::string_view s) {
  std::string out;
  for (char c : trim(s)) {
    if (c == ' ' || c == '_') c = '-';
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

void require_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> required,
                  std::initializer_list<std::string_view> optional) {
  if (!obj.is_object()) throw SchemaError(std::string(where) + ": expected an object");
  for (auto k : required) {
    if (!obj.contains(std::string(k))) {
      throw SchemaError(std::string(where) + ": missing field '" + std::string(k) + "'");
    }
  }
  for (const auto& [key, _] : obj.items()) {
    const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                       std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) throw SchemaError(std::string(where) + ": unexpected field '" + key + "'");
  }
}

std::string get_string(const json& obj, const char* key, std::string_view where, bool nonempty = true) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw SchemaError(std::string(where) + ": field '" + key + "' must be a string");
  auto s = v.get<std::string>();
  if (nonempty && is_blank(s)) {
    throw SchemaError(std::string(where) + ": field '" + key + "' must be nonempty");
  }
  return s;
}

Date get_date(const json& obj, const char* key, std::string_view where) {
  auto s = get_string(obj, key, where);
  auto d = parse_iso_date(s);
  if (!d) throw SchemaError(std::string(where) + ": field '" + key + "' is not an ISO-8601 date: " + s);
  return *d;
}

EvidencePage page_from_json(const json& obj, const std::string& where) {
  require_keys(obj, where, {"url", "title", "snippet"}, {"page_text", "summary"});
  EvidencePage p;
  p.url = get_string(obj, "url", where);
  p.title = get_string(obj, "title", where, false);
  p.snippet = get_string(obj, "snippet", where, false);
  if (obj.contains("page_text") && !obj.at("page_text").is_null()) {
    p.page_text = get_string(obj, "page_text", where, false);
  }
  if (obj.contains("summary") && !obj.at("summary").is_null()) {
    p.summary = get_string(obj, "summary", where, true);
  }
  return p;
}

}  // namespace

std::string_view truth_level_name(TruthLevel level) { return kLevelNames.at(static_cast<std::size_t>(to_int(level))); }

std::string_view two_level_name(TwoLevel level) { return level == TwoLevel::True ? "True" : "False"; }

std::optional<TruthLevel> truth_level_from_int(long long value) {
  if (value < 0 || value >= kTruthLevelCount) return std::nullopt;
  return static_cast<TruthLevel>(value);
}

std::optional<TruthLevel> truth_level_from_name(std::string_view name) {
  const auto n = normalize_level_name(name);
  for (int i = 0; i < kTruthLevelCount; ++i) {
    if (normalize_level_name(kLevelNames[static_cast<std::size_t>(i)]) == n) return static_cast<TruthLevel>(i);
  }
  return std::nullopt;
}

std::string_view dimension_key(QualityDimension d) { return kDimensionKeys.at(static_cast<std::size_t>(d)); }
std::string_view dimension_label(QualityDimension d) { return kDimensionLabels.at(static_cast<std::size_t>(d)); }

std::optional<QualityDimension> dimension_from_key(std::string_view key) {
  for (auto d : kAllDimensions) {
    if (dimension_key(d) == key) return d;
  }
  return std::nullopt;
}

std::optional<Date> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc{} || ptr != text.data() + pos + len) return std::nullopt;
    return v;
  };
  auto y = num(0, 4), m = num(5, 2), d = num(8, 2);
  if (!y || !m || !d) return std::nullopt;
  Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
            std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_iso_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

const Claim* Corpus::find(std::string_view claim_id) const {
  for (const auto& c : claims) {
    if (c.id == claim_id) return &c;
  }
  return nullptr;
}

Corpus corpus_from_json(const json& doc) {
  require_keys(doc, "corpus", {"metadata", "claims"}, {});
  Corpus corpus;

  const auto& meta = doc.at("metadata");
  require_keys(meta, "metadata", {"name", "date_from", "date_to", "topics"}, {"notes"});
  corpus.metadata.name = get_string(meta, "name", "metadata");
  corpus.metadata.date_from = get_date(meta, "date_from", "metadata");
  corpus.metadata.date_to = get_date(meta, "date_to", "metadata");
  if (corpus.metadata.date_to < corpus.metadata.date_from) {
    throw SchemaError("metadata: date_to precedes date_from");
  }
  if (!meta.at("topics").is_array()) throw SchemaError("metadata: 'topics' must be an array");
  std::set<std::string> topic_set;
  for (const auto& t : meta.at("topics")) {
    if (!t.is_string() || is_blank(t.get<std::string>())) {
      throw SchemaError("metadata: topics must be nonempty strings");
    }
    if (!topic_set.insert(t.get<std::string>()).second) {
      throw SchemaError("metadata: duplicate topic '" + t.get<std::string>() + "'");
    }
    corpus.metadata.topics.push_back(t.get<std::string>());
  }
  if (meta.contains("notes")) {
    if (!meta.at("notes").is_array()) throw SchemaError("metadata: 'notes' must be an array");
    for (const auto& n : meta.at("notes")) {
      if (!n.is_string()) throw SchemaError("metadata: notes must be strings");
      corpus.metadata.notes.push_back(n.get<std::string>());
    }
  }

  const auto& claims = doc.at("claims");
  if (!claims.is_array()) throw SchemaError("corpus: 'claims' must be an array");
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    const auto& c = claims[i];
    std::string where = "claims[" + std::to_string(i) + "]";
    require_keys(c, where, {"id", "text", "speaker", "date", "topic", "ground_truth", "evidence"}, {});
    Claim claim;
    claim.id = get_string(c, "id", where);
    where += " (" + claim.id + ")";
    claim.text = get_string(c, "text", where);
    claim.speaker = get_string(c, "speaker", where);
    claim.date = get_date(c, "date", where);
    claim.topic = get_string(c, "topic", where);
    if (!topic_set.contains(claim.topic)) {
      throw UnknownTopicError(where + ": topic '" + claim.topic + "' is not declared in metadata");
    }
    const auto& gt = c.at("ground_truth");
    if (!gt.is_number_integer()) throw SchemaError(where + ": ground_truth must be an integer 0..5");
    auto level = truth_level_from_int(gt.get<long long>());
    if (!level) throw SchemaError(where + ": ground_truth " + gt.dump() + " is outside 0..5");
    claim.ground_truth = *level;

    if (!c.at("evidence").is_array()) throw SchemaError(where + ": 'evidence' must be an array");
    std::unordered_set<std::string> urls;
    for (std::size_t j = 0; j < c.at("evidence").size(); ++j) {
      auto page = page_from_json(c.at("evidence")[j], where + ".evidence[" + std::to_string(j) + "]");
      if (!urls.insert(page.url).second) {
        throw SchemaError(where + ": duplicate evidence url '" + page.url + "'");
      }
      claim.evidence.push_back(std::move(page));
    }
    if (!ids.insert(claim.id).second) throw DuplicateIdError("duplicate claim id '" + claim.id + "'");
    corpus.claims.push_back(std::move(claim));
  }
  return corpus;
}

json corpus_to_json(const Corpus& corpus) {
  json meta = {{"name", corpus.metadata.name},
               {"date_from", format_iso_date(corpus.metadata.date_from)},
               {"date_to", format_iso_date(corpus.metadata.date_to)},
               {"topics", corpus.metadata.topics}};
  if (!corpus.metadata.notes.empty()) meta["notes"] = corpus.metadata.notes;

  json claims = json::array();
  for (const auto& c : corpus.claims) {
    json evidence = json::array();
    for (const auto& p : c.evidence) {
      json page = {{"url", p.url}, {"title", p.title}, {"snippet", p.snippet}};
      if (p.page_text) page["page_text"] = *p.page_text;
      if (p.summary) page["summary"] = *p.summary;
      evidence.push_back(std::move(page));
    }
    claims.push_back({{"id", c.id},
                      {"text", c.text},
                      {"speaker", c.speaker},
                      {"date", format_iso_date(c.date)},
                      {"topic", c.topic},
                      {"ground_truth", to_int(c.ground_truth)},
                      {"evidence", std::move(evidence)}});
  }
  return {{"metadata", std::move(meta)}, {"claims", std::move(claims)}};
}

Corpus load_corpus(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    throw ParseError(path.string() + ": UTF-8 byte order mark is not allowed");
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return corpus_from_json(doc);
}

std::string corpus_canonical_text(const Corpus& corpus) { return corpus_to_json(corpus).dump(2) + "\n"; }

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_text_file(path, corpus_canonical_text(corpus));
}

std::string corpus_digest(const Corpus& corpus) { return sha256_hex(corpus_to_json(corpus).dump()); }

std::string CorpusFilter::describe() const {
  std::string out = "filter:";
  if (!topics.empty()) {
    out += " topic=";
    for (std::size_t i = 0; i < topics.size(); ++i) out += (i ? "|" : "") + topics[i];
  }
  if (date_from) out += " from=" + format_iso_date(*date_from);
  if (date_to) out += " to=" + format_iso_date(*date_to);
  if (topics.empty() && !date_from && !date_to) out += " none";
  return out;
}

Corpus filter_corpus(const Corpus& corpus, const CorpusFilter& filter) {
  const auto& declared = corpus.metadata.topics;
  for (const auto& t : filter.topics) {
    if (std::find(declared.begin(), declared.end(), t) == declared.end()) {
      throw UnknownTopicError("topic '" + t + "' is not declared in corpus '" + corpus.metadata.name + "'");
    }
  }
  Corpus out;
  out.metadata = corpus.metadata;
  out.metadata.notes.push_back(filter.describe());
  if (filter.date_from && *filter.date_from > out.metadata.date_from) out.metadata.date_from = *filter.date_from;
  if (filter.date_to && *filter.date_to < out.metadata.date_to) out.metadata.date_to = *filter.date_to;
  for (const auto& c : corpus.claims) {
    if (!filter.topics.empty() &&
        std::find(filter.topics.begin(), filter.topics.end(), c.topic) == filter.topics.end()) {
      continue;
    }
    if (filter.date_from && c.date < *filter.date_from) continue;
    if (filter.date_to && c.date > *filter.date_to) continue;
    out.claims.push_back(c);
  }
  return out;
}

namespace {

constexpr std::array<std::string_view, 8> kSpeakers = {
    "State Senator A. Rivera", "Governor K. Moss",   "Representative L. Chen", "Campaign Committee X",
    "Mayor D. Okafor",         "Talk Show Host J.", "Senator P. Lindqvist",   "Advocacy Group Y"};

constexpr std::array<std::string_view, 6> kLevelPhrasing = {
    "is an outright fabrication with no factual basis",
    "is contradicted by the official records",
    "contains a kernel of truth but omits decisive facts",
    "is partially supported but leaves out important context",
    "is supported by the records with minor caveats",
    "is fully supported by the official records"};

}  // namespace

Corpus synthetic_corpus(const SyntheticCorpusOptions& options) {
  Rng rng(derive_seed(options.seed, "synthetic-corpus"));
  Corpus corpus;
  corpus.metadata.name = options.name;
  corpus.metadata.date_from = Date{std::chrono::year{options.year}, std::chrono::January, std::chrono::day{1}};
  corpus.metadata.date_to = Date{std::chrono::year{options.year}, std::chrono::December, std::chrono::day{31}};
  corpus.metadata.notes.push_back("synthetic fixture corpus; claims and pages are generated, not real");

  int total = 0;
  for (const auto& [topic, count] : options.topics) {
    corpus.metadata.topics.push_back(topic);
    total += count;
  }
  // Level-balanced ground truth in a seeded order.
  std::vector<int> levels(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) levels[static_cast<std::size_t>(i)] = i % kTruthLevelCount;
  rng.shuffle(levels);

  int index = 0;
  for (const auto& [topic, count] : options.topics) {
    for (int k = 0; k < count; ++k, ++index) {
      Claim c;
      char id[16];
      std::snprintf(id, sizeof id, "c%03d", index + 1);
      c.id = id;
      c.topic = topic;
      c.ground_truth = static_cast<TruthLevel>(levels[static_cast<std::size_t>(index)]);
      c.speaker = std::string(kSpeakers[rng.below(kSpeakers.size())]);
      const auto month = static_cast<unsigned>(1 + rng.below(12));
      const auto day = static_cast<unsigned>(1 + rng.below(28));
      c.date = Date{std::chrono::year{options.year}, std::chrono::month{month}, std::chrono::day{day}};
      c.text = "Synthetic " + topic + " statement #" + std::to_string(k + 1) + ": measure " +
               std::to_string(100 + rng.below(900)) + " changed outcome " + std::to_string(rng.below(100)) +
               " percent.";
      for (int p = 0; p < options.pages_per_claim; ++p) {
        EvidencePage page;
        page.url = "https://news.example.org/" + c.id + "/article-" + std::to_string(p + 1);
        page.title = "Report " + std::to_string(p + 1) + " on " + c.id;
        page.snippet = "Coverage of the " + topic + " statement by " + c.speaker + ".";
        page.page_text = "Article " + std::to_string(p + 1) + " about claim " + c.id + ". The reporting finds that " +
                         "the statement by " + c.speaker + " " +
                         std::string(kLevelPhrasing[static_cast<std::size_t>(to_int(c.ground_truth))]) +
                         ". Advertisement. Subscribe now. Related coverage follows.";
        if (options.with_summaries) {
          page.summary = "The article reports that the statement " +
                         std::string(kLevelPhrasing[static_cast<std::size_t>(to_int(c.ground_truth))]) + ".";
        }
        c.evidence.push_back(std::move(page));
      }
      corpus.claims.push_back(std::move(c));
    }
  }
  return corpus;
}

}  // namespace agentcrowd
