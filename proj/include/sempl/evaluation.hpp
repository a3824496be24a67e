#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sempl/jsonl.hpp"
#include "sempl/prediction.hpp"
#include "sempl/templating.hpp"

namespace sempl {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct MetricsReport {
  double auc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  ConfusionCounts confusion;
  std::size_t n = 0;

  // Degeneracy flags: zero-division precision/recall reported as 0.0,
  // single-class gold sets reported as AUC 0.5.
  bool precision_zero_division = false;
  bool recall_zero_division = false;
  bool auc_degenerate = false;
};

// Positive class is plausible (1). Precision/recall with an empty denominator
// are 0.0 with the corresponding flag set. AUC is the rank statistic over
// scores (ties count 0.5), computed from midranks.
MetricsReport compute_metrics(const std::vector<Prediction>& predictions,
                              const std::vector<int>& golds);

struct ErrorAnalysisReport {
  std::size_t wrong_total = 0;
  std::size_t wrong_with_unknown_event_type = 0;
  std::size_t wrong_with_trivial_entity_type = 0;
};

struct ScoredRecord {
  PromptRecord record;
  Prediction prediction;
  int gold = 0;
};

// Tallies the wrong predictions and how many of them carry the unknown
// event-type / trivial entity-type flags.
ErrorAnalysisReport error_analysis(const std::vector<ScoredRecord>& records);

json metrics_to_json(const MetricsReport& m);
json error_analysis_to_json(const ErrorAnalysisReport& r);

}  // namespace sempl
