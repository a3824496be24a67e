#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sempl/corpus.hpp"
#include "sempl/jsonl.hpp"

namespace sempl {

struct FrequencyTable {
  int label = 0;
  // Descending count, ties broken lexicographically.
  std::vector<std::pair<std::string, std::size_t>> entries;
};

// Top-k lowercased subject/verb/object tokens of the events with the given
// label, stop-list removed.
FrequencyTable top_words(const DatasetBundle& events, int label, std::size_t k,
                         const std::set<std::string>& stop_list = {});

class WordVectorProvider {
 public:
  virtual ~WordVectorProvider() = default;
  virtual std::optional<std::vector<double>> vector(const std::string& word) = 0;
};

// Text word-vector file: one "word v1 v2 ... vd" per line. An optional
// leading "count dim" header line is skipped.
class FixtureWordVectors : public WordVectorProvider {
 public:
  explicit FixtureWordVectors(const std::string& path);
  explicit FixtureWordVectors(std::map<std::string, std::vector<double>> table)
      : table_(std::move(table)) {}
  std::optional<std::vector<double>> vector(const std::string& word) override;

 private:
  std::map<std::string, std::vector<double>> table_;
};

struct SimilarityMatrix {
  std::vector<std::string> rows;  // resolved plausible top words
  std::vector<std::string> cols;  // resolved implausible top words
  std::vector<std::vector<double>> values;  // cosine, in [-1, 1]
  std::vector<std::string> skipped;         // words without vectors

  // Mean similarity over pairs of distinct words; the paper-style summary of
  // how close the two label vocabularies sit.
  double mean_cross_similarity() const;

  std::string to_csv() const;
};

// Cosine similarities between the two top-word sets. Degenerate when either
// side resolves no vectors at all.
SimilarityMatrix label_similarity(const FrequencyTable& top_plausible,
                                  const FrequencyTable& top_implausible,
                                  WordVectorProvider& embeddings);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

json frequency_to_json(const FrequencyTable& t);

// Minimal word-cloud rendering: word size scaled by count, row layout.
std::string frequency_to_svg(const FrequencyTable& t);

}  // namespace sempl
