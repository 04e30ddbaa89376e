#pragma once

#include <cstddef>
#include <span>

namespace agentcrowd {

struct PairwiseAgreement {
  double exact = 0.0;
  double directional = 0.0;
  std::size_t pairs = 0;
  std::size_t exact_count = 0;
  std::size_t directional_count = 0;
};

// Over all unordered claim pairs. Throws TooFewClaimsError / LengthMismatchError.
PairwiseAgreement pairwise_agreement(std::span<const int> labels, std::span<const int> truth);

}  // namespace agentcrowd
