#pragma once

#include <cstdint>
#include <optional>

#include "sempl/corpus.hpp"

namespace sempl {

struct AugmentationPlan {
  std::uint64_t seed = 0;
  // Only target supported: equalize the two label counts exactly.
  DatasetId pool_id = DatasetId::PAP;
  // When set, pool candidates are filtered to pool_id.
  bool filter_pool_by_id = true;
};

struct AugmentationStats {
  LabelCounts before;
  LabelCounts after;
  std::size_t sampled = 0;
  bool noop = false;  // base was already balanced, or skewed toward implausible
};

// Adds implausible events sampled uniformly without replacement from the pool
// until both label counts are equal. Sampled events get label 0, the train
// split and origin=augmented, and never duplicate a base triple. Raises
// DataError with the shortfall when the pool cannot cover the deficit.
DatasetBundle augment_balance(const DatasetBundle& base, const DatasetBundle& pool,
                              const AugmentationPlan& plan,
                              AugmentationStats* stats = nullptr);

}  // namespace sempl
