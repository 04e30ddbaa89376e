#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agentcrowd {

enum class Difference { Nominal, Ordinal, Interval };

std::string_view difference_name(Difference d);
std::optional<Difference> difference_from_name(std::string_view name);

// Raters x units, cells may be missing.
class ReliabilityMatrix {
 public:
  ReliabilityMatrix(std::vector<std::string> rows, std::vector<std::string> columns);

  void set(std::size_t row, std::size_t column, double value);
  const std::optional<double>& at(std::size_t row, std::size_t column) const;

  std::size_t row_count() const { return rows_.size(); }
  std::size_t column_count() const { return columns_.size(); }
  const std::vector<std::string>& rows() const { return rows_; }
  const std::vector<std::string>& columns() const { return columns_; }

  // Values present in one column.
  std::vector<double> unit(std::size_t column) const;

 private:
  std::vector<std::string> rows_;
  std::vector<std::string> columns_;
  std::vector<std::optional<double>> cells_;
};

struct AlphaResult {
  double alpha = 0.0;
  bool zero_variance = false;  // all pairable values equal; alpha set to 1
  std::size_t pairable_values = 0;
  double observed = 0.0;  // D_o
  double expected = 0.0;  // D_e
};

// Throws DegenerateError when no unit holds two values.
AlphaResult krippendorff_alpha(const ReliabilityMatrix& matrix, Difference difference = Difference::Interval);

// Two rows: crowd means and ground truth.
AlphaResult external_alpha(std::span<const double> crowd, std::span<const double> truth,
                           Difference difference = Difference::Interval);

}  // namespace agentcrowd
