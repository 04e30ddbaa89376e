#include "agentcrowd/metrics/annotations.hpp"

#include <charconv>
#include <map>
#include <set>

#include "agentcrowd/error.hpp"
#include "agentcrowd/util.hpp"

namespace agentcrowd {

std::vector<std::string> AnnotationSet::claim_ids(const Corpus& corpus) const {
  std::set<std::string_view> seen;
  for (const auto& e : entries) seen.insert(e.claim_id);
  std::vector<std::string> out;
  for (const auto& c : corpus.claims) {
    if (seen.contains(c.id)) out.push_back(c.id);
  }
  return out;
}

std::vector<std::string> AnnotationSet::rater_ids() const {
  std::vector<std::string> out;
  std::set<std::string_view> seen;
  for (const auto& e : entries) {
    if (seen.insert(e.rater_id).second) out.push_back(e.rater_id);
  }
  return out;
}

std::vector<int> AnnotationSet::values_for(std::string_view claim_id) const {
  std::vector<int> out;
  for (const auto& e : entries) {
    if (e.claim_id == claim_id) out.push_back(e.truthfulness);
  }
  return out;
}

void validate_annotations(const AnnotationSet& set, const Corpus& corpus) {
  std::set<std::pair<std::string_view, std::string_view>> seen;
  for (const auto& e : set.entries) {
    if (corpus.find(e.claim_id) == nullptr) {
      throw UnresolvedClaimError("annotation for unknown claim '" + e.claim_id + "' (rater " + e.rater_id + ")");
    }
    if (e.truthfulness < 0 || e.truthfulness > 5) {
      throw RangeError("truthfulness " + std::to_string(e.truthfulness) + " out of range for rater " + e.rater_id);
    }
    if (e.dimensions) {
      for (int v : *e.dimensions) {
        if (v < -2 || v > 2) throw RangeError("dimension value " + std::to_string(v) + " out of range for rater " + e.rater_id);
      }
    }
    if (!seen.insert({e.rater_id, e.claim_id}).second) {
      throw DuplicateIdError("more than one judgment by " + e.rater_id + " on " + e.claim_id);
    }
  }
}

AnnotationSet annotations_from_run_log(const RunLog& log, const Corpus& corpus, std::string crowd) {
  AnnotationSet out;
  out.crowd = std::move(crowd);
  out.provenance = Provenance::RunLog;
  for (const auto& rec : log.records) {
    if (rec.phase != Phase::Questionnaire) continue;
    if (!rec.questionnaire) {
      ++out.missing;
      continue;
    }
    Annotation a;
    a.rater_id = rec.agent_id;
    a.claim_id = rec.claim_id;
    a.truthfulness = to_int(rec.questionnaire->truthfulness);
    std::array<int, kDimensionCount> dims{};
    for (std::size_t d = 0; d < kDimensionCount; ++d) dims[d] = rec.questionnaire->dimensions[d].value;
    a.dimensions = dims;
    out.entries.push_back(std::move(a));
  }
  if (out.missing > 0) {
    out.warnings.push_back(std::to_string(out.missing) + " questionnaire records without a usable reply were skipped");
  }
  validate_annotations(out, corpus);
  return out;
}

namespace {

// RFC 4180 fields; quoted fields may hold commas, quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ParseError("csv: unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

int parse_int(const std::string& raw, const std::string& where) {
  const auto s = trim(raw);
  int v = 0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || s.empty()) throw SchemaError(where + ": '" + raw + "' is not an integer");
  return v;
}

}  // namespace

AnnotationSet annotations_from_csv_text(std::string_view text, const Corpus& corpus, std::string crowd) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  const auto rows = parse_csv(text);
  if (rows.empty()) throw SchemaError("csv: no header row");

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    auto name = to_lower(trim(rows[0][i]));
    if (name.ends_with("_value")) name.resize(name.size() - 6);
    if (!column.emplace(name, i).second) throw SchemaError("csv: duplicate column '" + name + "'");
  }
  AnnotationSet out;
  out.crowd = std::move(crowd);
  out.provenance = Provenance::HumanCsv;
  for (const char* required : {"rater_id", "claim_id", "truthfulness"}) {
    if (!column.contains(required)) throw SchemaError(std::string("csv: missing column '") + required + "'");
  }
  std::array<std::optional<std::size_t>, kDimensionCount> dim_col{};
  std::size_t dims_present = 0;
  for (auto d : kAllDimensions) {
    const auto it = column.find(std::string(dimension_key(d)));
    if (it != column.end()) {
      dim_col[static_cast<std::size_t>(d)] = it->second;
      ++dims_present;
    }
  }
  if (dims_present != 0 && dims_present != kDimensionCount) {
    out.warnings.push_back("csv: only " + std::to_string(dims_present) + " of 7 dimension columns present; dimensions ignored");
  }
  for (const auto& [name, idx] : column) {
    const bool known = name == "rater_id" || name == "claim_id" || name == "truthfulness" || dimension_from_key(name);
    if (!known) out.warnings.push_back("csv: ignoring column '" + name + "'");
  }

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto where = "csv line " + std::to_string(r + 1);
    if (row.size() != rows[0].size()) {
      throw SchemaError(where + ": expected " + std::to_string(rows[0].size()) + " fields, found " +
                        std::to_string(row.size()));
    }
    Annotation a;
    a.rater_id = trim(row[column["rater_id"]]);
    a.claim_id = trim(row[column["claim_id"]]);
    if (a.rater_id.empty() || a.claim_id.empty()) throw SchemaError(where + ": empty rater_id or claim_id");
    const auto& truth_raw = row[column["truthfulness"]];
    if (is_blank(truth_raw)) {
      ++out.missing;
      continue;
    }
    if (auto level = truth_level_from_name(trim(truth_raw))) {
      a.truthfulness = to_int(*level);
    } else {
      a.truthfulness = parse_int(truth_raw, where);
    }
    if (a.truthfulness < 0 || a.truthfulness > 5) {
      throw RangeError(where + ": truthfulness " + std::to_string(a.truthfulness) + " outside 0..5");
    }
    if (dims_present == kDimensionCount) {
      std::array<int, kDimensionCount> dims{};
      bool blank = false;
      for (std::size_t d = 0; d < kDimensionCount; ++d) {
        const auto& raw = row[*dim_col[d]];
        if (is_blank(raw)) {
          blank = true;
          break;
        }
        dims[d] = parse_int(raw, where);
        if (dims[d] < -2 || dims[d] > 2) throw RangeError(where + ": dimension value " + raw + " outside -2..2");
      }
      if (!blank) a.dimensions = dims;
    }
    out.entries.push_back(std::move(a));
  }
  if (out.missing > 0) out.warnings.push_back(std::to_string(out.missing) + " rows without truthfulness skipped");
  validate_annotations(out, corpus);
  return out;
}

AnnotationSet annotations_from_csv(const std::filesystem::path& path, const Corpus& corpus, std::string crowd) {
  if (!std::filesystem::exists(path)) throw MissingInputError("annotation file not found: " + path.string());
  return annotations_from_csv_text(read_text_file(path), corpus, std::move(crowd));
}

}  // namespace agentcrowd
