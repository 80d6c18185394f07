#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace corpusforge {

// Seeded 90/10 style partition. The dev side gets ceil(n * dev_fraction)
// items (at least one when n > 0); membership depends only on the id set and
// the seed, never on input order.
struct SplitPlan {
  std::vector<bool> is_dev;  // parallel to the input ids
  std::size_t train_count = 0;
  std::size_t dev_count = 0;
  std::vector<std::string> warnings;
};

SplitPlan plan_split(std::span<const std::uint64_t> ids, std::uint64_t seed, double dev_fraction = 0.1);

}  // namespace corpusforge
