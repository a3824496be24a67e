#include "sempl/evaluation.hpp"

#include <algorithm>
#include <numeric>

#include "sempl/errors.hpp"

namespace sempl {

MetricsReport compute_metrics(const std::vector<Prediction>& predictions,
                              const std::vector<int>& golds) {
  if (predictions.size() != golds.size())
    throw UsageError("compute_metrics: " + std::to_string(predictions.size()) +
                     " predictions vs " + std::to_string(golds.size()) + " golds");
  if (predictions.empty()) throw UsageError("compute_metrics: empty inputs");

  MetricsReport m;
  m.n = predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (golds[i] != 0 && golds[i] != 1)
      throw UsageError("compute_metrics: non-binary gold label at index " +
                       std::to_string(i));
    const bool pred = predictions[i].label == 1;
    const bool gold = golds[i] == 1;
    if (pred && gold) ++m.confusion.tp;
    else if (pred && !gold) ++m.confusion.fp;
    else if (!pred && gold) ++m.confusion.fn;
    else ++m.confusion.tn;
  }

  const auto& c = m.confusion;
  if (c.tp + c.fp > 0) {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  } else {
    m.precision_zero_division = true;
  }
  if (c.tp + c.fn > 0) {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    m.recall_zero_division = true;
  }
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(m.n);

  // Rank AUC via midranks: AUC = (R1 - n1(n1+1)/2) / (n1*n0) where R1 is the
  // midrank sum of the positives. Equals pairwise counting with 0.5 ties.
  const std::size_t n1 = c.tp + c.fn;
  const std::size_t n0 = c.fp + c.tn;
  if (n1 == 0 || n0 == 0) {
    m.auc = 0.5;
    m.auc_degenerate = true;
    return m;
  }
  std::vector<std::size_t> order(m.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].score < predictions[b].score;
  });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < m.n) {
    std::size_t j = i;
    while (j < m.n && predictions[order[j]].score == predictions[order[i]].score) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (golds[order[k]] == 1) rank_sum_pos += midrank;
    }
    i = j;
  }
  m.auc = (rank_sum_pos - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1)) /
          (static_cast<double>(n1) * static_cast<double>(n0));
  return m;
}

ErrorAnalysisReport error_analysis(const std::vector<ScoredRecord>& records) {
  ErrorAnalysisReport r;
  for (const auto& rec : records) {
    if (rec.prediction.label == rec.gold) continue;
    ++r.wrong_total;
    if (rec.record.flags.verb_unknown) ++r.wrong_with_unknown_event_type;
    if (rec.record.flags.has_trivial_entity_type) ++r.wrong_with_trivial_entity_type;
  }
  return r;
}

json metrics_to_json(const MetricsReport& m) {
  return json{{"auc", m.auc},
              {"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1},
              {"accuracy", m.accuracy},
              {"n", m.n},
              {"confusion",
               {{"tp", m.confusion.tp},
                {"fp", m.confusion.fp},
                {"fn", m.confusion.fn},
                {"tn", m.confusion.tn}}},
              {"precision_zero_division", m.precision_zero_division},
              {"recall_zero_division", m.recall_zero_division},
              {"auc_degenerate", m.auc_degenerate}};
}

json error_analysis_to_json(const ErrorAnalysisReport& r) {
  return json{{"wrong_total", r.wrong_total},
              {"wrong_with_unknown_event_type", r.wrong_with_unknown_event_type},
              {"wrong_with_trivial_entity_type", r.wrong_with_trivial_entity_type}};
}

}  // namespace sempl
