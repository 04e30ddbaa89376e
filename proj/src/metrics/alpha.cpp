#include "agentcrowd/metrics/alpha.hpp"

#include <algorithm>
#include <cmath>

#include "agentcrowd/error.hpp"

namespace agentcrowd {

std::string_view difference_name(Difference d) {
  switch (d) {
    case Difference::Nominal: return "nominal";
    case Difference::Ordinal: return "ordinal";
    case Difference::Interval: return "interval";
  }
  return "?";
}

std::optional<Difference> difference_from_name(std::string_view name) {
  if (name == "nominal") return Difference::Nominal;
  if (name == "ordinal") return Difference::Ordinal;
  if (name == "interval") return Difference::Interval;
  return std::nullopt;
}

ReliabilityMatrix::ReliabilityMatrix(std::vector<std::string> rows, std::vector<std::string> columns)
    : rows_(std::move(rows)), columns_(std::move(columns)), cells_(rows_.size() * columns_.size()) {}

void ReliabilityMatrix::set(std::size_t row, std::size_t column, double value) {
  cells_.at(row * columns_.size() + column) = value;
}

const std::optional<double>& ReliabilityMatrix::at(std::size_t row, std::size_t column) const {
  return cells_.at(row * columns_.size() + column);
}

std::vector<double> ReliabilityMatrix::unit(std::size_t column) const {
  std::vector<double> out;
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (const auto& v = at(r, column)) out.push_back(*v);
  }
  return out;
}

AlphaResult krippendorff_alpha(const ReliabilityMatrix& matrix, Difference difference) {
  // Distinct values and the coincidence matrix over them.
  std::vector<std::vector<double>> units;
  std::vector<double> values;
  for (std::size_t c = 0; c < matrix.column_count(); ++c) {
    auto u = matrix.unit(c);
    if (u.size() < 2) continue;
    values.insert(values.end(), u.begin(), u.end());
    units.push_back(std::move(u));
  }
  if (units.empty()) throw DegenerateError("krippendorff_alpha: no unit has two or more values");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const std::size_t m = values.size();
  auto index_of = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
  };

  std::vector<double> o(m * m, 0.0);
  for (const auto& u : units) {
    const double w = 1.0 / static_cast<double>(u.size() - 1);
    for (std::size_t i = 0; i < u.size(); ++i) {
      for (std::size_t j = 0; j < u.size(); ++j) {
        if (i != j) o[index_of(u[i]) * m + index_of(u[j])] += w;
      }
    }
  }
  std::vector<double> marginal(m, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t k = 0; k < m; ++k) marginal[c] += o[c * m + k];
    n += marginal[c];
  }

  auto delta2 = [&](std::size_t c, std::size_t k) {
    switch (difference) {
      case Difference::Nominal: return c == k ? 0.0 : 1.0;
      case Difference::Interval: return (values[c] - values[k]) * (values[c] - values[k]);
      case Difference::Ordinal: {
        const auto lo = std::min(c, k);
        const auto hi = std::max(c, k);
        double s = 0.0;
        for (std::size_t g = lo; g <= hi; ++g) s += marginal[g];
        s -= (marginal[c] + marginal[k]) / 2.0;
        return s * s;
      }
    }
    return 0.0;
  };

  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t k = 0; k < m; ++k) {
      const double d = delta2(c, k);
      observed += o[c * m + k] * d;
      expected += marginal[c] * marginal[k] * d;
    }
  }
  AlphaResult out;
  out.pairable_values = static_cast<std::size_t>(std::llround(n));
  out.observed = observed / n;
  out.expected = expected / (n * (n - 1.0));
  if (out.expected == 0.0) {
    out.alpha = 1.0;
    out.zero_variance = true;
  } else {
    out.alpha = 1.0 - out.observed / out.expected;
  }
  return out;
}

AlphaResult external_alpha(std::span<const double> crowd, std::span<const double> truth, Difference difference) {
  if (crowd.size() != truth.size()) throw LengthMismatchError("external_alpha: crowd and truth lengths differ");
  std::vector<std::string> columns;
  for (std::size_t i = 0; i < crowd.size(); ++i) columns.push_back(std::to_string(i));
  ReliabilityMatrix m({"crowd", "ground_truth"}, std::move(columns));
  for (std::size_t i = 0; i < crowd.size(); ++i) {
    m.set(0, i, crowd[i]);
    m.set(1, i, truth[i]);
  }
  return krippendorff_alpha(m, difference);
}

}  // namespace agentcrowd
