#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace agentcrowd {

enum class Scale { Six, Two };

std::string_view scale_name(Scale s);  // "6-level" / "2-level"
std::optional<Scale> scale_from_name(std::string_view name);  // accepts "six", "6", "6-level", ...
int scale_max(Scale s);

// Six-level value projected onto `s`.
int project(int six_level, Scale s);

struct Aggregate {
  double mean = 0.0;
  int label = 0;
};

// `values` are six-level judgments (0..5). On the two-level scale they are
// mapped first; a mean of exactly 0.5 is broken by the six-level mean
// (> 2.5 is True). Throws EmptyError / RangeError.
Aggregate aggregate_claim(std::span<const int> values, Scale scale);

}  // namespace agentcrowd
