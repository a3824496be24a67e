#include "sempl/augmentation.hpp"

#include <iostream>
#include <random>
#include <set>

#include "sempl/errors.hpp"
#include "sempl/util.hpp"

namespace sempl {

DatasetBundle augment_balance(const DatasetBundle& base, const DatasetBundle& pool,
                              const AugmentationPlan& plan, AugmentationStats* stats) {
  LabelCounts before = base.counts();
  AugmentationStats local;
  local.before = before;

  if (before.plausible <= before.implausible) {
    // The skew this addresses is toward plausible; anything else is a no-op.
    if (before.plausible < before.implausible)
      std::cerr << "warning: base already skewed toward implausible ("
                << before.implausible << " vs " << before.plausible
                << "), augmentation skipped\n";
    local.after = before;
    local.noop = true;
    if (stats) *stats = local;
    return base;
  }

  std::size_t deficit = before.plausible - before.implausible;

  std::set<EventTriple> base_triples;
  for (const auto& e : base.events) base_triples.insert(e.triple);

  // Candidate pool: implausible events, deduplicated by triple, not clashing
  // with any base triple.
  std::vector<LabeledEvent> candidates;
  std::set<EventTriple> seen;
  for (const auto& e : pool.events) {
    if (e.label != 0) continue;
    if (plan.filter_pool_by_id && e.dataset != plan.pool_id) continue;
    if (base_triples.count(e.triple)) continue;
    if (!seen.insert(e.triple).second) continue;
    candidates.push_back(e);
  }

  if (candidates.size() < deficit) {
    throw DataError("insufficient augmentation pool: need " + std::to_string(deficit) +
                    " implausible events, pool provides " +
                    std::to_string(candidates.size()) + " (shortfall " +
                    std::to_string(deficit - candidates.size()) + ")");
  }

  std::mt19937_64 rng(plan.seed);
  std::vector<std::size_t> picked = sample_indices(candidates.size(), deficit, rng);

  DatasetBundle out;
  out.events = base.events;
  out.events.reserve(base.events.size() + deficit);
  for (std::size_t idx : picked) {
    LabeledEvent e = candidates[idx];
    e.label = 0;
    e.split = Split::train;  // augmented events join only the train split
    e.origin = Origin::augmented;
    out.events.push_back(std::move(e));
  }

  local.after = out.counts();
  local.sampled = deficit;
  if (stats) *stats = local;
  return out;
}

}  // namespace sempl
