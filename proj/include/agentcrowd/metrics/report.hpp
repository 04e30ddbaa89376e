#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "agentcrowd/corpus.hpp"
#include "agentcrowd/crowd.hpp"
#include "agentcrowd/metrics/aggregation.hpp"
#include "agentcrowd/metrics/alpha.hpp"
#include "agentcrowd/metrics/annotations.hpp"
#include "agentcrowd/metrics/classification.hpp"
#include "agentcrowd/metrics/pairwise.hpp"
#include "agentcrowd/metrics/stats.hpp"

namespace agentcrowd {

enum class PairwiseMode { Aggregated, PerRater };
enum class CorrelationMode { Response, ClaimMean };

struct EvalOptions {
  Difference difference = Difference::Interval;
  Averaging averaging = Averaging::Weighted;
  PairwiseMode pairwise = PairwiseMode::Aggregated;
};

struct MetricReport {
  Scale scale = Scale::Six;
  std::string crowd;
  std::string group_key;  // empty, "topic", "rater_count" or a trait key
  std::string group_value;

  std::size_t claims = 0;
  std::size_t raters = 0;
  std::size_t judgments = 0;

  double accuracy = 0.0;
  int correct = 0;
  int total = 0;
  Averaging averaging = Averaging::Weighted;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  // Positive class True; two-level scale only.
  std::optional<double> binary_precision;
  std::optional<double> binary_recall;
  std::optional<double> binary_f1;

  // Fraction of individual judgments equal to the ground truth.
  double judgment_accuracy = 0.0;
  int judgments_correct = 0;

  std::optional<double> external_alpha;
  std::optional<double> internal_alpha;
  // Six-level scale only.
  std::optional<double> pairwise_exact;
  std::optional<double> pairwise_directional;

  std::vector<std::string> warnings;
};

nlohmann::json report_to_json(const MetricReport& r);
MetricReport report_from_json(const nlohmann::json& j);

// Per-claim crowd means and labels in corpus order.
struct ClaimAggregate {
  std::string claim_id;
  int truth = 0;  // on the chosen scale
  Aggregate crowd;
  std::size_t raters = 0;
};

std::vector<ClaimAggregate> aggregate_claims(const AnnotationSet& set, const Corpus& corpus, Scale scale);

// Throws MissingGroundTruthError / UnresolvedClaimError / EmptyError.
MetricReport evaluate(const AnnotationSet& set, const Corpus& corpus, Scale scale, const EvalOptions& options = {});

// Pooled per-rater variant of pairwise agreement on the six-level scale.
PairwiseAgreement pairwise_per_rater(const AnnotationSet& set, const Corpus& corpus);

// Raters x claims matrix on the given scale.
ReliabilityMatrix rating_matrix(const AnnotationSet& set, const Corpus& corpus, Scale scale);

enum class GroupKind { Topic, Trait, RaterCount };

struct GroupKey {
  GroupKind kind = GroupKind::Topic;
  std::optional<Trait> trait;  // Trait only
  int rater_count = 0;         // RaterCount only
};

// "topic", "rater_count:3", or a trait key such as "gender".
GroupKey group_key_from_string(std::string_view text);
std::string group_key_string(const GroupKey& key);

// Subset of annotations keeping exactly `raters` judgments per claim.
// Claims with fewer raters are dropped with a warning.
AnnotationSet subsample_raters(const AnnotationSet& set, int raters, std::uint64_t seed);

// One report per group; groups without usable data are skipped and noted
// in `warnings`. Throws UnknownKeyError.
std::vector<MetricReport> breakdown(const AnnotationSet& set, const Corpus& corpus,
                                    std::span<const AgentProfile> crowd, const GroupKey& key, Scale scale,
                                    const EvalOptions& options, std::uint64_t seed,
                                    std::vector<std::string>* warnings = nullptr);

// Per-rater accuracy compared across the categories of one trait:
// Mann-Whitney for two categories, Kruskal-Wallis otherwise.
struct TraitTest {
  Trait trait;
  Scale scale = Scale::Six;
  std::string crowd;
  std::string test;  // "mann-whitney" or "kruskal-wallis"
  double statistic = 0.0;
  double p = 1.0;
  std::vector<std::pair<std::string, std::size_t>> groups;  // category, raters
};

std::optional<TraitTest> trait_test(const AnnotationSet& set, const Corpus& corpus,
                                    std::span<const AgentProfile> crowd, Trait trait, Scale scale);

struct DimensionCorrelations {
  std::string crowd;
  CorrelationMode mode = CorrelationMode::Response;
  std::array<std::optional<double>, kDimensionCount> r{};  // nullopt: undefined
  std::size_t responses = 0;
};

DimensionCorrelations dimension_correlations(const AnnotationSet& set, CorrelationMode mode = CorrelationMode::Response);

// Summary of per-claim crowd means (six-level) grouped by ground truth.
struct LabelDistribution {
  std::string crowd;
  TruthLevel truth = TruthLevel::PantsOnFire;
  std::size_t claims = 0;
  double mean = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t outliers_low = 0;   // below q1 - 1.5 IQR
  std::size_t outliers_high = 0;  // above q3 + 1.5 IQR
  std::vector<double> values;
};

std::vector<LabelDistribution> rating_distribution(const AnnotationSet& set, const Corpus& corpus);

// Kruskal-Wallis across crowds for each ground-truth label.
struct LabelTest {
  TruthLevel truth = TruthLevel::PantsOnFire;
  KruskalWallis result;
};

std::vector<LabelTest> distribution_tests(std::span<const std::vector<LabelDistribution>> crowds);

nlohmann::json distribution_to_json(const LabelDistribution& d);
LabelDistribution distribution_from_json(const nlohmann::json& j);
nlohmann::json correlations_to_json(const DimensionCorrelations& c);
DimensionCorrelations correlations_from_json(const nlohmann::json& j);
nlohmann::json trait_test_to_json(const TraitTest& t);
TraitTest trait_test_from_json(const nlohmann::json& j);

// Everything one evaluate command produces; the unit `report` renders.
struct ReportBundle {
  std::vector<MetricReport> reports;
  std::vector<DimensionCorrelations> correlations;
  std::vector<LabelDistribution> distributions;
  std::vector<TraitTest> trait_tests;
  std::vector<std::string> warnings;
};

nlohmann::json bundle_to_json(const ReportBundle& b);
ReportBundle bundle_from_json(const nlohmann::json& j);
ReportBundle merge_bundles(std::span<const ReportBundle> bundles);

std::string reports_to_csv(std::span<const MetricReport> reports);
std::string distributions_to_csv(std::span<const LabelDistribution> distributions);
std::string correlations_to_csv(std::span<const DimensionCorrelations> correlations);
std::string trait_tests_to_csv(std::span<const TraitTest> tests);

// Markdown tables: overall reports, one table per grouping key, rating
// distributions, dimension correlations and trait tests.
std::string bundle_to_markdown(const ReportBundle& bundle);

}  // namespace agentcrowd
