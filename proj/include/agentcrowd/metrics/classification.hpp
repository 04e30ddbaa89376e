#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agentcrowd {

// Binary scores the positive class only (label 1 on the two-level scale).
enum class Averaging { Weighted, Macro, Binary };

std::string_view averaging_name(Averaging a);
std::optional<Averaging> averaging_from_name(std::string_view name);

struct ClassScores {
  int label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;    // occurrences in truth
  int predicted = 0;  // occurrences in predictions
};

struct Classification {
  double accuracy = 0.0;
  int correct = 0;
  int total = 0;
  Averaging averaging = Averaging::Weighted;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<ClassScores> per_class;  // over the union of observed labels
  std::vector<std::string> warnings;   // undefined ratios set to 0
};

// Throws LengthMismatchError / EmptyError.
Classification classification_metrics(std::span<const int> predicted, std::span<const int> truth,
                                      Averaging averaging = Averaging::Weighted, int positive_label = 1);

}  // namespace agentcrowd
