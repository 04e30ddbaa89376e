#include "agentcrowd/metrics/aggregation.hpp"

#include <string>

#include "agentcrowd/corpus.hpp"
#include "agentcrowd/error.hpp"
#include "agentcrowd/util.hpp"

namespace agentcrowd {

std::string_view scale_name(Scale s) { return s == Scale::Six ? "6-level" : "2-level"; }

std::optional<Scale> scale_from_name(std::string_view name) {
  const auto n = to_lower(trim(name));
  if (n == "6-level" || n == "six" || n == "6" || n == "6level") return Scale::Six;
  if (n == "2-level" || n == "two" || n == "2" || n == "2level") return Scale::Two;
  return std::nullopt;
}

int scale_max(Scale s) { return s == Scale::Six ? 5 : 1; }

int project(int six_level, Scale s) {
  if (six_level < 0 || six_level > 5) throw RangeError("truthfulness value out of range: " + std::to_string(six_level));
  if (s == Scale::Six) return six_level;
  return map_to_two_level(static_cast<TruthLevel>(six_level)) == TwoLevel::True ? 1 : 0;
}

Aggregate aggregate_claim(std::span<const int> values, Scale scale) {
  if (values.empty()) throw EmptyError("aggregate_claim: no values");
  long long six_sum = 0;
  long long sum = 0;
  for (int v : values) {
    sum += project(v, scale);
    six_sum += v;
  }
  const auto n = static_cast<long long>(values.size());
  Aggregate out;
  out.mean = static_cast<double>(sum) / static_cast<double>(n);
  if (scale == Scale::Six) {
    // Half away from zero on nonnegative values, in exact integer arithmetic.
    out.label = static_cast<int>((2 * sum + n) / (2 * n));
  } else if (2 * sum != n) {
    out.label = 2 * sum > n ? 1 : 0;
  } else {
    out.label = 2 * six_sum > 5 * n ? 1 : 0;
  }
  return out;
}

}  // namespace agentcrowd
