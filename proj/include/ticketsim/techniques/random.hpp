#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ticketsim/rng.hpp"

namespace ticketsim {

/// Uniform sample without replacement of min(k, |candidates|) ids, in draw
/// order (partial Fisher-Yates). Deterministic per seed.
inline std::vector<std::string> random_select(std::vector<std::string> candidates, std::size_t k,
                                              std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t take = std::min(k, candidates.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(take);
  return candidates;
}

}  // namespace ticketsim
