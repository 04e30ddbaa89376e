#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "agentcrowd/error.hpp"
#include "agentcrowd/metrics/report.hpp"

namespace agentcrowd {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

Scale scale_of(const json& j) {
  auto s = scale_from_name(j.get<std::string>());
  if (!s) throw SchemaError("unknown scale '" + j.get<std::string>() + "'");
  return *s;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string num(const std::optional<double>& v, int digits = 3) { return v ? fixed(*v, digits) : "--"; }

std::string csv_num(const std::optional<double>& v) { return v ? fixed(*v, 6) : ""; }

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

std::string row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + md_cell(c) + " |";
  return out + "\n";
}

std::string header(const std::vector<std::string>& cells) {
  std::string out = row(cells) + "|";
  for (std::size_t i = 0; i < cells.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  return out + "\n";
}

std::string accuracy_cell(const MetricReport& r) {
  return fixed(r.accuracy, 3) + " (" + std::to_string(r.correct) + "/" + std::to_string(r.total) + ")";
}

std::vector<std::string> metric_cells(const MetricReport& r) {
  return {accuracy_cell(r), fixed(r.precision, 3), fixed(r.recall, 3), fixed(r.f1, 3), num(r.external_alpha),
          num(r.pairwise_exact), num(r.pairwise_directional), num(r.internal_alpha)};
}

const std::vector<std::string> kMetricHeads = {"Accuracy (Correct/Total)", "Precision", "Recall", "F1",
                                               "Ext. α", "Pairwise Exact", "Pairwise Directional", "Int. α"};

// Two-level rows first, then six-level; stable otherwise.
std::vector<const MetricReport*> ordered(std::span<const MetricReport> reports, std::string_view group_key) {
  std::vector<const MetricReport*> out;
  for (const auto& r : reports) {
    if (r.group_key == group_key) out.push_back(&r);
  }
  std::stable_sort(out.begin(), out.end(), [](const MetricReport* a, const MetricReport* b) {
    return (a->scale == Scale::Two) > (b->scale == Scale::Two);
  });
  return out;
}

}  // namespace

json report_to_json(const MetricReport& r) {
  return {{"scale", scale_name(r.scale)},
          {"crowd", r.crowd},
          {"group_key", r.group_key},
          {"group_value", r.group_value},
          {"claims", r.claims},
          {"raters", r.raters},
          {"judgments", r.judgments},
          {"accuracy", r.accuracy},
          {"correct", r.correct},
          {"total", r.total},
          {"averaging", averaging_name(r.averaging)},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"macro_f1", r.macro_f1},
          {"binary_precision", opt(r.binary_precision)},
          {"binary_recall", opt(r.binary_recall)},
          {"binary_f1", opt(r.binary_f1)},
          {"judgment_accuracy", r.judgment_accuracy},
          {"judgments_correct", r.judgments_correct},
          {"external_alpha", opt(r.external_alpha)},
          {"internal_alpha", opt(r.internal_alpha)},
          {"pairwise_exact", opt(r.pairwise_exact)},
          {"pairwise_directional", opt(r.pairwise_directional)},
          {"warnings", r.warnings}};
}

MetricReport report_from_json(const json& j) {
  try {
    MetricReport r;
    r.scale = scale_of(j.at("scale"));
    r.crowd = j.at("crowd").get<std::string>();
    r.group_key = j.at("group_key").get<std::string>();
    r.group_value = j.at("group_value").get<std::string>();
    r.claims = j.at("claims").get<std::size_t>();
    r.raters = j.at("raters").get<std::size_t>();
    r.judgments = j.at("judgments").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.correct = j.at("correct").get<int>();
    r.total = j.at("total").get<int>();
    const auto avg = averaging_from_name(j.at("averaging").get<std::string>());
    if (!avg) throw SchemaError("unknown averaging");
    r.averaging = *avg;
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.macro_precision = j.at("macro_precision").get<double>();
    r.macro_recall = j.at("macro_recall").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.binary_precision = opt_from(j, "binary_precision");
    r.binary_recall = opt_from(j, "binary_recall");
    r.binary_f1 = opt_from(j, "binary_f1");
    r.judgment_accuracy = j.at("judgment_accuracy").get<double>();
    r.judgments_correct = j.at("judgments_correct").get<int>();
    r.external_alpha = opt_from(j, "external_alpha");
    r.internal_alpha = opt_from(j, "internal_alpha");
    r.pairwise_exact = opt_from(j, "pairwise_exact");
    r.pairwise_directional = opt_from(j, "pairwise_directional");
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("metric report: ") + e.what());
  }
}

json distribution_to_json(const LabelDistribution& d) {
  return {{"crowd", d.crowd},        {"truth", truth_level_name(d.truth)}, {"claims", d.claims},
          {"mean", d.mean},          {"min", d.min},
          {"q1", d.q1},              {"median", d.median},
          {"q3", d.q3},              {"max", d.max},
          {"outliers_low", d.outliers_low}, {"outliers_high", d.outliers_high},
          {"values", d.values}};
}

LabelDistribution distribution_from_json(const json& j) {
  try {
    LabelDistribution d;
    d.crowd = j.at("crowd").get<std::string>();
    const auto level = truth_level_from_name(j.at("truth").get<std::string>());
    if (!level) throw SchemaError("unknown truth level");
    d.truth = *level;
    d.claims = j.at("claims").get<std::size_t>();
    d.mean = j.at("mean").get<double>();
    d.min = j.at("min").get<double>();
    d.q1 = j.at("q1").get<double>();
    d.median = j.at("median").get<double>();
    d.q3 = j.at("q3").get<double>();
    d.max = j.at("max").get<double>();
    d.outliers_low = j.at("outliers_low").get<std::size_t>();
    d.outliers_high = j.at("outliers_high").get<std::size_t>();
    d.values = j.at("values").get<std::vector<double>>();
    return d;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("rating distribution: ") + e.what());
  }
}

json correlations_to_json(const DimensionCorrelations& c) {
  json r = json::object();
  for (auto d : kAllDimensions) r[std::string(dimension_key(d))] = opt(c.r[static_cast<std::size_t>(d)]);
  return {{"crowd", c.crowd},
          {"mode", c.mode == CorrelationMode::Response ? "response" : "claim-mean"},
          {"responses", c.responses},
          {"r", std::move(r)}};
}

DimensionCorrelations correlations_from_json(const json& j) {
  try {
    DimensionCorrelations c;
    c.crowd = j.at("crowd").get<std::string>();
    c.mode = j.at("mode").get<std::string>() == "claim-mean" ? CorrelationMode::ClaimMean : CorrelationMode::Response;
    c.responses = j.at("responses").get<std::size_t>();
    for (auto d : kAllDimensions) c.r[static_cast<std::size_t>(d)] = opt_from(j.at("r"), std::string(dimension_key(d)).c_str());
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("dimension correlations: ") + e.what());
  }
}

json trait_test_to_json(const TraitTest& t) {
  json groups = json::array();
  for (const auto& [category, n] : t.groups) groups.push_back({{"category", category}, {"raters", n}});
  return {{"trait", trait_info(t.trait).key}, {"scale", scale_name(t.scale)}, {"crowd", t.crowd},
          {"test", t.test},                   {"statistic", t.statistic},       {"p", t.p},
          {"groups", std::move(groups)}};
}

TraitTest trait_test_from_json(const json& j) {
  try {
    TraitTest t;
    const auto trait = trait_from_key(j.at("trait").get<std::string>());
    if (!trait) throw SchemaError("unknown trait");
    t.trait = *trait;
    t.scale = scale_of(j.at("scale"));
    t.crowd = j.at("crowd").get<std::string>();
    t.test = j.at("test").get<std::string>();
    t.statistic = j.at("statistic").get<double>();
    t.p = j.at("p").get<double>();
    for (const auto& g : j.at("groups")) t.groups.emplace_back(g.at("category").get<std::string>(), g.at("raters").get<std::size_t>());
    return t;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("trait test: ") + e.what());
  }
}

json bundle_to_json(const ReportBundle& b) {
  json out = {{"reports", json::array()},
              {"correlations", json::array()},
              {"distributions", json::array()},
              {"trait_tests", json::array()},
              {"warnings", b.warnings}};
  for (const auto& r : b.reports) out["reports"].push_back(report_to_json(r));
  for (const auto& c : b.correlations) out["correlations"].push_back(correlations_to_json(c));
  for (const auto& d : b.distributions) out["distributions"].push_back(distribution_to_json(d));
  for (const auto& t : b.trait_tests) out["trait_tests"].push_back(trait_test_to_json(t));
  return out;
}

ReportBundle bundle_from_json(const json& j) {
  if (!j.is_object() || !j.contains("reports")) throw SchemaError("not a report bundle");
  ReportBundle b;
  for (const auto& r : j.at("reports")) b.reports.push_back(report_from_json(r));
  for (const auto& c : j.value("correlations", json::array())) b.correlations.push_back(correlations_from_json(c));
  for (const auto& d : j.value("distributions", json::array())) b.distributions.push_back(distribution_from_json(d));
  for (const auto& t : j.value("trait_tests", json::array())) b.trait_tests.push_back(trait_test_from_json(t));
  b.warnings = j.value("warnings", std::vector<std::string>{});
  return b;
}

ReportBundle merge_bundles(std::span<const ReportBundle> bundles) {
  ReportBundle out;
  for (const auto& b : bundles) {
    out.reports.insert(out.reports.end(), b.reports.begin(), b.reports.end());
    out.correlations.insert(out.correlations.end(), b.correlations.begin(), b.correlations.end());
    out.distributions.insert(out.distributions.end(), b.distributions.begin(), b.distributions.end());
    out.trait_tests.insert(out.trait_tests.end(), b.trait_tests.begin(), b.trait_tests.end());
    out.warnings.insert(out.warnings.end(), b.warnings.begin(), b.warnings.end());
  }
  return out;
}

std::string reports_to_csv(std::span<const MetricReport> reports) {
  std::string out =
      "scale,crowd,group_key,group_value,claims,raters,judgments,accuracy,correct,total,averaging,precision,recall,f1,"
      "macro_precision,macro_recall,macro_f1,binary_precision,binary_recall,binary_f1,judgment_accuracy,"
      "judgments_correct,external_alpha,internal_alpha,pairwise_exact,pairwise_directional\n";
  for (const auto& r : reports) {
    const std::vector<std::string> cells = {
        std::string(scale_name(r.scale)), csv_field(r.crowd), csv_field(r.group_key), csv_field(r.group_value),
        std::to_string(r.claims), std::to_string(r.raters), std::to_string(r.judgments), fixed(r.accuracy, 6),
        std::to_string(r.correct), std::to_string(r.total), std::string(averaging_name(r.averaging)),
        fixed(r.precision, 6), fixed(r.recall, 6), fixed(r.f1, 6), fixed(r.macro_precision, 6),
        fixed(r.macro_recall, 6), fixed(r.macro_f1, 6), csv_num(r.binary_precision), csv_num(r.binary_recall),
        csv_num(r.binary_f1), fixed(r.judgment_accuracy, 6), std::to_string(r.judgments_correct),
        csv_num(r.external_alpha), csv_num(r.internal_alpha), csv_num(r.pairwise_exact),
        csv_num(r.pairwise_directional)};
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += "\n";
  }
  return out;
}

std::string distributions_to_csv(std::span<const LabelDistribution> distributions) {
  std::string out = "crowd,truth,claims,mean,min,q1,median,q3,max,outliers_low,outliers_high\n";
  for (const auto& d : distributions) {
    out += csv_field(d.crowd) + "," + std::string(truth_level_name(d.truth)) + "," + std::to_string(d.claims) + "," +
           fixed(d.mean, 6) + "," + fixed(d.min, 6) + "," + fixed(d.q1, 6) + "," + fixed(d.median, 6) + "," +
           fixed(d.q3, 6) + "," + fixed(d.max, 6) + "," + std::to_string(d.outliers_low) + "," +
           std::to_string(d.outliers_high) + "\n";
  }
  return out;
}

std::string correlations_to_csv(std::span<const DimensionCorrelations> correlations) {
  std::string out = "crowd,mode,responses";
  for (auto d : kAllDimensions) out += "," + std::string(dimension_key(d));
  out += "\n";
  for (const auto& c : correlations) {
    out += csv_field(c.crowd) + "," + (c.mode == CorrelationMode::Response ? "response" : "claim-mean") + "," +
           std::to_string(c.responses);
    for (const auto& r : c.r) out += "," + csv_num(r);
    out += "\n";
  }
  return out;
}

std::string trait_tests_to_csv(std::span<const TraitTest> tests) {
  std::string out = "trait,scale,crowd,test,statistic,p,groups\n";
  for (const auto& t : tests) {
    std::string groups;
    for (const auto& [category, n] : t.groups) groups += (groups.empty() ? "" : "; ") + category + "=" + std::to_string(n);
    out += std::string(trait_info(t.trait).key) + "," + std::string(scale_name(t.scale)) + "," + csv_field(t.crowd) +
           "," + t.test + "," + fixed(t.statistic, 6) + "," + fixed(t.p, 6) + "," + csv_field(groups) + "\n";
  }
  return out;
}

std::string bundle_to_markdown(const ReportBundle& bundle) {
  std::ostringstream md;
  const auto& reports = bundle.reports;

  const auto overall = ordered(reports, "");
  if (!overall.empty()) {
    md << "## Performance and agreement\n\n";
    std::vector<std::string> heads = {"Scale", "Crowd"};
    heads.insert(heads.end(), kMetricHeads.begin(), kMetricHeads.end());
    md << header(heads);
    for (const auto* r : overall) {
      std::vector<std::string> cells = {std::string(scale_name(r->scale)), r->crowd};
      const auto m = metric_cells(*r);
      cells.insert(cells.end(), m.begin(), m.end());
      md << row(cells);
    }
    md << "\nPrecision, recall and F1 are " << averaging_name(overall.front()->averaging)
       << "-averaged over classes. Pairwise agreement is defined on the 6-level scale only.\n\n";

    std::vector<const MetricReport*> binary;
    for (const auto* r : overall) {
      if (r->binary_precision) binary.push_back(r);
    }
    if (!binary.empty()) {
      md << "### 2-level scores for the True class\n\n";
      md << header({"Crowd", "Precision", "Recall", "F1", "Macro Precision", "Macro Recall", "Macro F1"});
      for (const auto* r : binary) {
        md << row({r->crowd, num(r->binary_precision), num(r->binary_recall), num(r->binary_f1),
                   fixed(r->macro_precision, 3), fixed(r->macro_recall, 3), fixed(r->macro_f1, 3)});
      }
      md << "\n";
    }
  }

  const auto topics = ordered(reports, "topic");
  if (!topics.empty()) {
    md << "## Performance by topic\n\n";
    std::vector<std::string> heads = {"Scale", "Crowd", "Topic"};
    heads.insert(heads.end(), kMetricHeads.begin(), kMetricHeads.end());
    md << header(heads);
    for (const auto* r : topics) {
      std::vector<std::string> cells = {std::string(scale_name(r->scale)), r->crowd, r->group_value};
      const auto m = metric_cells(*r);
      cells.insert(cells.end(), m.begin(), m.end());
      md << row(cells);
    }
    md << "\n";
  }

  auto sweep = ordered(reports, "rater_count");
  if (!sweep.empty()) {
    std::stable_sort(sweep.begin(), sweep.end(), [](const MetricReport* a, const MetricReport* b) {
      if (a->scale != b->scale) return a->scale == Scale::Two;
      return std::stoi(a->group_value) < std::stoi(b->group_value);
    });
    md << "## Performance by number of raters per claim\n\n";
    std::vector<std::string> heads = {"Scale", "Crowd", "Raters"};
    heads.insert(heads.end(), kMetricHeads.begin(), kMetricHeads.end());
    md << header(heads);
    for (const auto* r : sweep) {
      std::vector<std::string> cells = {std::string(scale_name(r->scale)), r->crowd, r->group_value};
      const auto m = metric_cells(*r);
      cells.insert(cells.end(), m.begin(), m.end());
      md << row(cells);
    }
    md << "\n";
  }

  // Trait tables: accuracy of individual judgments per category and scale.
  std::vector<std::string> trait_keys;
  for (const auto& r : reports) {
    if (r.group_key.empty() || r.group_key == "topic" || r.group_key == "rater_count") continue;
    if (std::find(trait_keys.begin(), trait_keys.end(), r.group_key) == trait_keys.end()) trait_keys.push_back(r.group_key);
  }
  if (!trait_keys.empty()) {
    md << "## Accuracy by rater trait\n\n";
    std::vector<std::string> crowds;
    for (const auto& r : reports) {
      if (std::find(crowds.begin(), crowds.end(), r.crowd) == crowds.end()) crowds.push_back(r.crowd);
    }
    std::vector<std::string> heads = {"Trait", "Category"};
    for (const auto& c : crowds) {
      heads.push_back(c + " 2-level");
      heads.push_back(c + " 6-level");
    }
    md << header(heads);
    for (const auto& key : trait_keys) {
      const auto trait = trait_from_key(key);
      const std::string label = trait ? std::string(trait_info(*trait).label) : key;
      std::vector<std::string> categories;
      for (const auto& r : reports) {
        if (r.group_key == key && std::find(categories.begin(), categories.end(), r.group_value) == categories.end()) {
          categories.push_back(r.group_value);
        }
      }
      for (const auto& category : categories) {
        std::vector<std::string> cells = {label, category};
        for (const auto& crowd : crowds) {
          for (auto scale : {Scale::Two, Scale::Six}) {
            const auto it = std::find_if(reports.begin(), reports.end(), [&](const MetricReport& r) {
              return r.group_key == key && r.group_value == category && r.crowd == crowd && r.scale == scale;
            });
            cells.push_back(it == reports.end() ? "--" : fixed(it->judgment_accuracy, 3));
          }
        }
        md << row(cells);
      }
    }
    md << "\nAccuracy here is the fraction of individual judgments matching the ground truth.\n\n";
  }

  if (!bundle.trait_tests.empty()) {
    md << "### Differences in per-rater accuracy across trait categories\n\n";
    md << header({"Trait", "Scale", "Crowd", "Test", "Statistic", "p", "Groups"});
    for (const auto& t : bundle.trait_tests) {
      std::string groups;
      for (const auto& [category, n] : t.groups) groups += (groups.empty() ? "" : ", ") + category + " (" + std::to_string(n) + ")";
      md << row({std::string(trait_info(t.trait).label), std::string(scale_name(t.scale)), t.crowd, t.test,
                 fixed(t.statistic, 3), fixed(t.p, 4), groups});
    }
    md << "\n";
  }

  if (!bundle.distributions.empty()) {
    md << "## Distribution of per-claim crowd means by ground-truth label\n\n";
    md << header({"Crowd", "Label", "Claims", "Mean", "Min", "Q1", "Median", "Q3", "Max", "Outliers below",
                  "Outliers above"});
    for (const auto& d : bundle.distributions) {
      md << row({d.crowd, std::string(truth_level_name(d.truth)), std::to_string(d.claims), fixed(d.mean, 3),
                 fixed(d.min, 3), fixed(d.q1, 3), fixed(d.median, 3), fixed(d.q3, 3), fixed(d.max, 3),
                 std::to_string(d.outliers_low), std::to_string(d.outliers_high)});
    }
    md << "\n";
    std::map<std::string, std::vector<LabelDistribution>> by_crowd;
    std::vector<std::string> crowd_order;
    for (const auto& d : bundle.distributions) {
      if (!by_crowd.contains(d.crowd)) crowd_order.push_back(d.crowd);
      by_crowd[d.crowd].push_back(d);
    }
    if (crowd_order.size() >= 2) {
      std::vector<std::vector<LabelDistribution>> crowds;
      for (const auto& c : crowd_order) crowds.push_back(by_crowd[c]);
      const auto tests = distribution_tests(crowds);
      if (!tests.empty()) {
        md << "### Kruskal-Wallis test across crowds per label\n\n";
        md << header({"Label", "H", "df", "p"});
        for (const auto& t : tests) {
          md << row({std::string(truth_level_name(t.truth)), fixed(t.result.h, 3), std::to_string(t.result.df),
                     fixed(t.result.p, 4)});
        }
        md << "\n";
      }
    }
  }

  if (!bundle.correlations.empty()) {
    md << "## Correlation between truthfulness and quality dimensions\n\n";
    std::vector<std::string> heads = {"Dimension"};
    for (const auto& c : bundle.correlations) heads.push_back(c.crowd);
    md << header(heads);
    for (auto d : kAllDimensions) {
      std::vector<std::string> cells = {std::string(dimension_label(d))};
      for (const auto& c : bundle.correlations) {
        const auto& r = c.r[static_cast<std::size_t>(d)];
        cells.push_back(r ? fixed(*r, 2) : "undefined");
      }
      md << row(cells);
    }
    md << "\n";
  }

  if (!bundle.warnings.empty()) {
    md << "## Warnings\n\n";
    for (const auto& w : bundle.warnings) md << "- " << w << "\n";
    md << "\n";
  }
  return md.str();
}

}  // namespace agentcrowd
