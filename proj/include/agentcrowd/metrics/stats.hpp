#pragma once

#include <optional>
#include <span>
#include <vector>

namespace agentcrowd {

// Pearson r; nullopt when either variable has zero variance.
// Throws LengthMismatchError, EmptyError for fewer than two points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// 1-based average ranks.
std::vector<double> midranks(std::span<const double> values);

// Linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

enum class PValueMethod { Auto, Exact, Normal };

struct MannWhitney {
  double u = 0.0;  // U of the first sample
  double p = 1.0;  // two-sided
  bool exact = false;
};

// Auto uses the exact permutation distribution when n_a + n_b <= 12.
// Throws EmptySampleError.
MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b,
                           PValueMethod method = PValueMethod::Auto, bool continuity = true);

struct KruskalWallis {
  double h = 0.0;
  double p = 1.0;
  int df = 0;
  bool exact = false;
};

// Auto uses the exact permutation distribution when the total n <= 10.
// Throws EmptyGroupError.
KruskalWallis kruskal_wallis(std::span<const std::vector<double>> groups, PValueMethod method = PValueMethod::Auto);

}  // namespace agentcrowd
