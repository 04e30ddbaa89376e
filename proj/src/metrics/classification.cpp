#include "agentcrowd/metrics/classification.hpp"

#include <algorithm>
#include <set>

#include "agentcrowd/error.hpp"

namespace agentcrowd {

std::string_view averaging_name(Averaging a) {
  switch (a) {
    case Averaging::Weighted: return "weighted";
    case Averaging::Macro: return "macro";
    case Averaging::Binary: return "binary";
  }
  return "?";
}

std::optional<Averaging> averaging_from_name(std::string_view name) {
  if (name == "weighted") return Averaging::Weighted;
  if (name == "macro") return Averaging::Macro;
  if (name == "binary") return Averaging::Binary;
  return std::nullopt;
}

namespace {

double ratio(int num, int den, bool& undefined) {
  if (den == 0) {
    undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / den;
}

}  // namespace

Classification classification_metrics(std::span<const int> predicted, std::span<const int> truth,
                                      Averaging averaging, int positive_label) {
  if (predicted.size() != truth.size()) {
    throw LengthMismatchError("classification_metrics: " + std::to_string(predicted.size()) + " predictions for " +
                              std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw EmptyError("classification_metrics: no claims");

  Classification out;
  out.averaging = averaging;
  out.total = static_cast<int>(truth.size());
  std::set<int> labels(truth.begin(), truth.end());
  labels.insert(predicted.begin(), predicted.end());
  if (averaging == Averaging::Binary) labels.insert(positive_label);

  for (int label : labels) {
    ClassScores c;
    c.label = label;
    int tp = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == label) ++c.support;
      if (predicted[i] == label) ++c.predicted;
      if (truth[i] == label && predicted[i] == label) ++tp;
    }
    bool undefined_p = false;
    bool undefined_r = false;
    c.precision = ratio(tp, c.predicted, undefined_p);
    c.recall = ratio(tp, c.support, undefined_r);
    c.f1 = c.precision + c.recall > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    if (undefined_p) out.warnings.push_back("precision undefined for label " + std::to_string(label) + "; set to 0");
    if (undefined_r) out.warnings.push_back("recall undefined for label " + std::to_string(label) + "; set to 0");
    out.per_class.push_back(c);
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == truth[i]) ++out.correct;
  }
  out.accuracy = static_cast<double>(out.correct) / out.total;

  switch (averaging) {
    case Averaging::Binary: {
      const auto it = std::find_if(out.per_class.begin(), out.per_class.end(),
                                   [&](const ClassScores& c) { return c.label == positive_label; });
      out.precision = it->precision;
      out.recall = it->recall;
      out.f1 = it->f1;
      break;
    }
    case Averaging::Macro: {
      for (const auto& c : out.per_class) {
        out.precision += c.precision;
        out.recall += c.recall;
        out.f1 += c.f1;
      }
      const auto k = static_cast<double>(out.per_class.size());
      out.precision /= k;
      out.recall /= k;
      out.f1 /= k;
      break;
    }
    case Averaging::Weighted: {
      for (const auto& c : out.per_class) {
        const double w = static_cast<double>(c.support) / out.total;
        out.precision += w * c.precision;
        out.recall += w * c.recall;
        out.f1 += w * c.f1;
      }
      break;
    }
  }
  return out;
}

}  // namespace agentcrowd
