#include "agentcrowd/metrics/pairwise.hpp"

#include <string>

#include "agentcrowd/error.hpp"

namespace agentcrowd {

namespace {

int sign(int x) { return (x > 0) - (x < 0); }

}  // namespace

PairwiseAgreement pairwise_agreement(std::span<const int> labels, std::span<const int> truth) {
  if (labels.size() != truth.size()) throw LengthMismatchError("pairwise_agreement: label and truth lengths differ");
  if (labels.size() < 2) throw TooFewClaimsError("pairwise_agreement needs at least two claims");
  PairwiseAgreement out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const int da = labels[i] - labels[j];
      const int dt = truth[i] - truth[j];
      ++out.pairs;
      if (da == dt) ++out.exact_count;
      if (sign(da) == sign(dt)) ++out.directional_count;
    }
  }
  out.exact = static_cast<double>(out.exact_count) / static_cast<double>(out.pairs);
  out.directional = static_cast<double>(out.directional_count) / static_cast<double>(out.pairs);
  return out;
}

}  // namespace agentcrowd
