#include "corpusforge/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "corpusforge/random.hpp"

namespace corpusforge {

SplitPlan plan_split(std::span<const std::uint64_t> ids, std::uint64_t seed, double dev_fraction) {
  SplitPlan plan;
  const std::size_t n = ids.size();
  plan.is_dev.assign(n, false);
  if (n == 0) return plan;

  auto dev = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * dev_fraction - 1e-9));
  if (n < 10) {
    plan.warnings.push_back(fmt::format("only {} items to split; dev receives {} item(s)", n, std::max<std::size_t>(dev, 1)));
  }
  dev = std::clamp<std::size_t>(dev, 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = stream_key(seed, ids[a]);
    const auto kb = stream_key(seed, ids[b]);
    return ka != kb ? ka < kb : ids[a] < ids[b];
  });
  for (std::size_t k = 0; k < dev; ++k) plan.is_dev[order[k]] = true;
  plan.dev_count = dev;
  plan.train_count = n - dev;
  return plan;
}

}  // namespace corpusforge
