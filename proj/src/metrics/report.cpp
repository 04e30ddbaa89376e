#include "agentcrowd/metrics/report.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "agentcrowd/error.hpp"
#include "agentcrowd/util.hpp"

namespace agentcrowd {

namespace {

int truth_on(const Claim& claim, Scale scale) { return project(to_int(claim.ground_truth), scale); }

const Claim& resolve(const Corpus& corpus, std::string_view claim_id) {
  const Claim* c = corpus.find(claim_id);
  if (c == nullptr) throw UnresolvedClaimError("claim '" + std::string(claim_id) + "' is not in the corpus");
  return *c;
}

AnnotationSet filtered(const AnnotationSet& set, auto&& keep) {
  AnnotationSet out;
  out.crowd = set.crowd;
  out.provenance = set.provenance;
  for (const auto& e : set.entries) {
    if (keep(e)) out.entries.push_back(e);
  }
  return out;
}

}  // namespace

std::vector<ClaimAggregate> aggregate_claims(const AnnotationSet& set, const Corpus& corpus, Scale scale) {
  std::map<std::string_view, std::vector<int>> by_claim;
  for (const auto& e : set.entries) {
    resolve(corpus, e.claim_id);
    by_claim[e.claim_id].push_back(e.truthfulness);
  }
  std::vector<ClaimAggregate> out;
  for (const auto& claim : corpus.claims) {
    const auto it = by_claim.find(claim.id);
    if (it == by_claim.end()) continue;
    out.push_back({claim.id, truth_on(claim, scale), aggregate_claim(it->second, scale), it->second.size()});
  }
  return out;
}

ReliabilityMatrix rating_matrix(const AnnotationSet& set, const Corpus& corpus, Scale scale) {
  const auto raters = set.rater_ids();
  const auto claims = set.claim_ids(corpus);
  std::map<std::string_view, std::size_t> row, col;
  for (std::size_t i = 0; i < raters.size(); ++i) row[raters[i]] = i;
  for (std::size_t i = 0; i < claims.size(); ++i) col[claims[i]] = i;
  ReliabilityMatrix m(raters, claims);
  for (const auto& e : set.entries) m.set(row.at(e.rater_id), col.at(e.claim_id), project(e.truthfulness, scale));
  return m;
}

PairwiseAgreement pairwise_per_rater(const AnnotationSet& set, const Corpus& corpus) {
  std::map<std::string_view, std::vector<std::pair<int, int>>> by_rater;  // (value, truth)
  for (const auto& e : set.entries) {
    by_rater[e.rater_id].emplace_back(e.truthfulness, to_int(resolve(corpus, e.claim_id).ground_truth));
  }
  PairwiseAgreement out;
  for (const auto& [rater, items] : by_rater) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      for (std::size_t j = i + 1; j < items.size(); ++j) {
        const int da = items[i].first - items[j].first;
        const int dt = items[i].second - items[j].second;
        ++out.pairs;
        if (da == dt) ++out.exact_count;
        if ((da > 0) - (da < 0) == (dt > 0) - (dt < 0)) ++out.directional_count;
      }
    }
  }
  if (out.pairs == 0) throw TooFewClaimsError("no rater judged two or more claims");
  out.exact = static_cast<double>(out.exact_count) / static_cast<double>(out.pairs);
  out.directional = static_cast<double>(out.directional_count) / static_cast<double>(out.pairs);
  return out;
}

MetricReport evaluate(const AnnotationSet& set, const Corpus& corpus, Scale scale, const EvalOptions& options) {
  if (set.entries.empty()) throw EmptyError("no annotations for crowd '" + set.crowd + "'");
  const auto aggregates = aggregate_claims(set, corpus, scale);

  MetricReport r;
  r.scale = scale;
  r.crowd = set.crowd;
  r.claims = aggregates.size();
  r.raters = set.rater_ids().size();
  r.judgments = set.entries.size();

  std::vector<int> predicted, truth;
  std::vector<double> means, truth_values;
  for (const auto& a : aggregates) {
    predicted.push_back(a.crowd.label);
    truth.push_back(a.truth);
    means.push_back(a.crowd.mean);
    truth_values.push_back(a.truth);
  }

  const auto main = classification_metrics(predicted, truth, options.averaging);
  r.accuracy = main.accuracy;
  r.correct = main.correct;
  r.total = main.total;
  r.averaging = options.averaging;
  r.precision = main.precision;
  r.recall = main.recall;
  r.f1 = main.f1;
  r.warnings = main.warnings;
  const auto macro = classification_metrics(predicted, truth, Averaging::Macro);
  r.macro_precision = macro.precision;
  r.macro_recall = macro.recall;
  r.macro_f1 = macro.f1;
  if (scale == Scale::Two) {
    const auto binary = classification_metrics(predicted, truth, Averaging::Binary, 1);
    r.binary_precision = binary.precision;
    r.binary_recall = binary.recall;
    r.binary_f1 = binary.f1;
  }

  for (const auto& e : set.entries) {
    if (project(e.truthfulness, scale) == truth_on(resolve(corpus, e.claim_id), scale)) ++r.judgments_correct;
  }
  r.judgment_accuracy = static_cast<double>(r.judgments_correct) / static_cast<double>(r.judgments);

  try {
    r.external_alpha = external_alpha(means, truth_values, options.difference).alpha;
  } catch (const DegenerateError& e) {
    r.warnings.push_back(std::string("external alpha undefined: ") + e.what());
  }
  try {
    const auto internal = krippendorff_alpha(rating_matrix(set, corpus, scale), options.difference);
    r.internal_alpha = internal.alpha;
    if (internal.zero_variance) r.warnings.push_back("internal alpha: all ratings identical; set to 1 by convention");
  } catch (const DegenerateError& e) {
    r.warnings.push_back(std::string("internal alpha undefined: ") + e.what());
  }

  if (scale == Scale::Six) {
    try {
      const auto pw = options.pairwise == PairwiseMode::Aggregated ? pairwise_agreement(predicted, truth)
                                                                   : pairwise_per_rater(set, corpus);
      r.pairwise_exact = pw.exact;
      r.pairwise_directional = pw.directional;
    } catch (const TooFewClaimsError& e) {
      r.warnings.push_back(std::string("pairwise agreement undefined: ") + e.what());
    }
  }
  return r;
}

GroupKey group_key_from_string(std::string_view text) {
  const auto t = to_lower(trim(text));
  GroupKey key;
  if (t == "topic") {
    key.kind = GroupKind::Topic;
    return key;
  }
  if (t.starts_with("rater_count:") || t.starts_with("raters:")) {
    key.kind = GroupKind::RaterCount;
    const auto num = t.substr(t.find(':') + 1);
    try {
      std::size_t used = 0;
      key.rater_count = std::stoi(num, &used);
      if (used != num.size() || key.rater_count < 1) throw std::invalid_argument(num);
    } catch (const std::exception&) {
      throw UnknownKeyError("grouping '" + std::string(text) + "': rater count must be a positive integer");
    }
    return key;
  }
  const auto trait_name = t.starts_with("trait:") ? t.substr(6) : t;
  if (auto trait = trait_from_key(trait_name)) {
    key.kind = GroupKind::Trait;
    key.trait = *trait;
    return key;
  }
  throw UnknownKeyError("unknown grouping key '" + std::string(text) + "'");
}

std::string group_key_string(const GroupKey& key) {
  switch (key.kind) {
    case GroupKind::Topic: return "topic";
    case GroupKind::RaterCount: return "rater_count:" + std::to_string(key.rater_count);
    case GroupKind::Trait: return std::string(trait_info(*key.trait).key);
  }
  return "?";
}

AnnotationSet subsample_raters(const AnnotationSet& set, int raters, std::uint64_t seed) {
  if (raters < 1) throw ConfigError("rater count must be at least 1");
  std::map<std::string, std::vector<std::string>> by_claim;
  for (const auto& e : set.entries) by_claim[e.claim_id].push_back(e.rater_id);

  std::set<std::pair<std::string, std::string>> keep;
  std::vector<std::string> warnings;
  for (auto& [claim, ids] : by_claim) {
    if (static_cast<int>(ids.size()) < raters) {
      warnings.push_back("claim " + claim + " has " + std::to_string(ids.size()) + " raters, fewer than " +
                         std::to_string(raters) + "; dropped");
      continue;
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(seed, "subsample/" + std::to_string(raters) + "/" + claim));
    rng.shuffle(ids);
    for (int i = 0; i < raters; ++i) keep.emplace(ids[static_cast<std::size_t>(i)], claim);
  }
  auto out = filtered(set, [&](const Annotation& e) { return keep.contains({e.rater_id, e.claim_id}); });
  out.warnings = std::move(warnings);
  return out;
}

std::vector<MetricReport> breakdown(const AnnotationSet& set, const Corpus& corpus,
                                    std::span<const AgentProfile> crowd, const GroupKey& key, Scale scale,
                                    const EvalOptions& options, std::uint64_t seed,
                                    std::vector<std::string>* warnings) {
  auto note = [&](std::string w) {
    if (warnings != nullptr) warnings->push_back(std::move(w));
  };
  std::vector<std::pair<std::string, AnnotationSet>> groups;

  switch (key.kind) {
    case GroupKind::Topic: {
      for (const auto& topic : corpus.metadata.topics) {
        groups.emplace_back(topic, filtered(set, [&](const Annotation& e) {
                              return resolve(corpus, e.claim_id).topic == topic;
                            }));
      }
      break;
    }
    case GroupKind::RaterCount: {
      auto sub = subsample_raters(set, key.rater_count, seed);
      for (auto& w : sub.warnings) note(set.crowd + ": " + w);
      sub.warnings.clear();
      groups.emplace_back(std::to_string(key.rater_count), std::move(sub));
      break;
    }
    case GroupKind::Trait: {
      if (!key.trait) throw UnknownKeyError("trait grouping without a trait");
      if (crowd.empty()) {
        throw UnknownKeyError("grouping by " + std::string(trait_info(*key.trait).key) + " needs rater profiles");
      }
      std::map<std::string_view, const AgentProfile*> profiles;
      for (const auto& p : crowd) profiles[p.agent_id] = &p;
      std::map<std::string, std::string> category_of;
      std::size_t unknown = 0;
      for (const auto& id : set.rater_ids()) {
        const auto it = profiles.find(id);
        if (it == profiles.end()) {
          ++unknown;
          category_of[id] = std::string(kUnspecified);
        } else {
          category_of[id] = it->second->get(*key.trait);
        }
      }
      if (unknown > 0) note(set.crowd + ": " + std::to_string(unknown) + " raters have no profile; grouped as Unspecified");
      std::vector<std::string> order;
      for (const auto& c : trait_info(*key.trait).categories) order.emplace_back(c);
      for (const auto& id : set.rater_ids()) {
        if (std::find(order.begin(), order.end(), category_of[id]) == order.end()) order.push_back(category_of[id]);
      }
      for (const auto& category : order) {
        groups.emplace_back(category,
                            filtered(set, [&](const Annotation& e) { return category_of[e.rater_id] == category; }));
      }
      break;
    }
  }

  std::vector<MetricReport> out;
  for (auto& [value, subset] : groups) {
    if (subset.entries.empty()) {
      // Declared categories nobody falls into are expected; only note real gaps.
      if (key.kind != GroupKind::Trait) note(set.crowd + ": group " + value + " has no annotations; skipped");
      continue;
    }
    auto report = evaluate(subset, corpus, scale, options);
    report.group_key = key.kind == GroupKind::RaterCount ? "rater_count" : group_key_string(key);
    report.group_value = value;
    out.push_back(std::move(report));
  }
  return out;
}

std::optional<TraitTest> trait_test(const AnnotationSet& set, const Corpus& corpus,
                                    std::span<const AgentProfile> crowd, Trait trait, Scale scale) {
  std::map<std::string_view, const AgentProfile*> profiles;
  for (const auto& p : crowd) profiles[p.agent_id] = &p;
  std::map<std::string, std::pair<int, int>> per_rater;  // correct, total
  for (const auto& e : set.entries) {
    auto& [correct, total] = per_rater[e.rater_id];
    ++total;
    if (project(e.truthfulness, scale) == truth_on(resolve(corpus, e.claim_id), scale)) ++correct;
  }
  std::map<std::string, std::vector<double>> groups;
  for (const auto& [rater, ct] : per_rater) {
    const auto it = profiles.find(rater);
    if (it == profiles.end()) continue;
    const auto category = it->second->get(trait);
    if (category == kUnspecified) continue;
    groups[category].push_back(static_cast<double>(ct.first) / ct.second);
  }
  if (groups.size() < 2) return std::nullopt;

  TraitTest t;
  t.trait = trait;
  t.scale = scale;
  t.crowd = set.crowd;
  std::vector<std::vector<double>> samples;
  for (auto& [category, values] : groups) {
    t.groups.emplace_back(category, values.size());
    samples.push_back(std::move(values));
  }
  if (samples.size() == 2) {
    const auto mw = mann_whitney_u(samples[0], samples[1]);
    t.test = "mann-whitney";
    t.statistic = mw.u;
    t.p = mw.p;
  } else {
    const auto kw = kruskal_wallis(samples);
    t.test = "kruskal-wallis";
    t.statistic = kw.h;
    t.p = kw.p;
  }
  return t;
}

DimensionCorrelations dimension_correlations(const AnnotationSet& set, CorrelationMode mode) {
  DimensionCorrelations out;
  out.crowd = set.crowd;
  out.mode = mode;
  std::vector<const Annotation*> rated;
  for (const auto& e : set.entries) {
    if (e.dimensions) rated.push_back(&e);
  }
  out.responses = rated.size();

  std::vector<std::array<double, kDimensionCount>> xs;
  std::vector<double> ys;
  if (mode == CorrelationMode::Response) {
    for (const auto* e : rated) {
      std::array<double, kDimensionCount> x{};
      for (std::size_t d = 0; d < kDimensionCount; ++d) x[d] = (*e->dimensions)[d];
      xs.push_back(x);
      ys.push_back(e->truthfulness);
    }
  } else {
    std::map<std::string_view, std::vector<const Annotation*>> by_claim;
    for (const auto* e : rated) by_claim[e->claim_id].push_back(e);
    for (const auto& [claim, items] : by_claim) {
      std::array<double, kDimensionCount> x{};
      double y = 0.0;
      for (const auto* e : items) {
        for (std::size_t d = 0; d < kDimensionCount; ++d) x[d] += (*e->dimensions)[d];
        y += e->truthfulness;
      }
      for (auto& v : x) v /= static_cast<double>(items.size());
      xs.push_back(x);
      ys.push_back(y / static_cast<double>(items.size()));
    }
  }
  if (ys.size() < 2) return out;
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    std::vector<double> x;
    for (const auto& row : xs) x.push_back(row[d]);
    out.r[d] = pearson(x, ys);
  }
  return out;
}

std::vector<LabelDistribution> rating_distribution(const AnnotationSet& set, const Corpus& corpus) {
  std::map<int, std::vector<double>> by_level;
  for (const auto& a : aggregate_claims(set, corpus, Scale::Six)) by_level[a.truth].push_back(a.crowd.mean);
  std::vector<LabelDistribution> out;
  for (auto& [level, values] : by_level) {
    LabelDistribution d;
    d.crowd = set.crowd;
    d.truth = static_cast<TruthLevel>(level);
    d.claims = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    d.mean = sum / static_cast<double>(values.size());
    d.min = *std::min_element(values.begin(), values.end());
    d.max = *std::max_element(values.begin(), values.end());
    d.q1 = quantile(values, 0.25);
    d.median = quantile(values, 0.5);
    d.q3 = quantile(values, 0.75);
    const double iqr = d.q3 - d.q1;
    for (double v : values) {
      if (v < d.q1 - 1.5 * iqr) ++d.outliers_low;
      if (v > d.q3 + 1.5 * iqr) ++d.outliers_high;
    }
    d.values = std::move(values);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<LabelTest> distribution_tests(std::span<const std::vector<LabelDistribution>> crowds) {
  std::vector<LabelTest> out;
  for (int level = 0; level < kTruthLevelCount; ++level) {
    std::vector<std::vector<double>> groups;
    for (const auto& crowd : crowds) {
      for (const auto& d : crowd) {
        if (to_int(d.truth) == level && !d.values.empty()) groups.push_back(d.values);
      }
    }
    if (groups.size() < 2) continue;
    out.push_back({static_cast<TruthLevel>(level), kruskal_wallis(groups)});
  }
  return out;
}

}  // namespace agentcrowd
