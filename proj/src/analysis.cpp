#include "sempl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sempl/errors.hpp"
#include "sempl/util.hpp"

namespace sempl {

FrequencyTable top_words(const DatasetBundle& events, int label, std::size_t k,
                         const std::set<std::string>& stop_list) {
  if (k < 1) throw UsageError("top_words: k must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& e : events.events) {
    if (e.label != label) continue;
    for (const auto* field : {&e.triple.subject, &e.triple.verb, &e.triple.object}) {
      for (const auto& tok : split_whitespace(*field)) {
        std::string w = to_lower(tok);
        if (stop_list.count(w)) continue;
        ++counts[w];
      }
    }
  }
  FrequencyTable table;
  table.label = label;
  table.entries.assign(counts.begin(), counts.end());
  std::sort(table.entries.begin(), table.entries.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  if (table.entries.size() > k) table.entries.resize(k);
  return table;
}

FixtureWordVectors::FixtureWordVectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open word vectors: " + path);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    auto parts = split_whitespace(line);
    if (parts.empty()) continue;
    if (first) {
      first = false;
      // "count dim" header of the classic text format
      if (parts.size() == 2 && parts[0].find_first_not_of("0123456789") == std::string::npos &&
          parts[1].find_first_not_of("0123456789") == std::string::npos)
        continue;
    }
    if (parts.size() < 2) continue;
    std::vector<double> vec;
    vec.reserve(parts.size() - 1);
    try {
      for (std::size_t i = 1; i < parts.size(); ++i) vec.push_back(std::stod(parts[i]));
    } catch (const std::exception&) {
      throw DataError(path + ": non-numeric vector component for word '" + parts[0] + "'");
    }
    table_[to_lower(parts[0])] = std::move(vec);
  }
}

std::optional<std::vector<double>> FixtureWordVectors::vector(const std::string& word) {
  auto it = table_.find(to_lower(word));
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw UsageError("cosine_similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

SimilarityMatrix label_similarity(const FrequencyTable& top_plausible,
                                  const FrequencyTable& top_implausible,
                                  WordVectorProvider& embeddings) {
  SimilarityMatrix m;
  std::vector<std::vector<double>> row_vecs, col_vecs;
  for (const auto& [word, count] : top_plausible.entries) {
    (void)count;
    if (auto v = embeddings.vector(word)) {
      m.rows.push_back(word);
      row_vecs.push_back(std::move(*v));
    } else {
      m.skipped.push_back(word);
    }
  }
  for (const auto& [word, count] : top_implausible.entries) {
    (void)count;
    if (auto v = embeddings.vector(word)) {
      m.cols.push_back(word);
      col_vecs.push_back(std::move(*v));
    } else {
      m.skipped.push_back(word);
    }
  }
  if (m.rows.empty() || m.cols.empty())
    throw DataError("label_similarity: no resolvable words on one side");

  m.values.assign(m.rows.size(), std::vector<double>(m.cols.size(), 0.0));
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    for (std::size_t j = 0; j < m.cols.size(); ++j) {
      m.values[i][j] = cosine_similarity(row_vecs[i], col_vecs[j]);
    }
  }
  return m;
}

double SimilarityMatrix::mean_cross_similarity() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (rows[i] == cols[j]) continue;
      sum += values[i][j];
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::string SimilarityMatrix::to_csv() const {
  std::ostringstream out;
  out << "word";
  for (const auto& c : cols) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << rows[i];
    for (std::size_t j = 0; j < cols.size(); ++j) out << ',' << values[i][j];
    out << '\n';
  }
  return out.str();
}

json frequency_to_json(const FrequencyTable& t) {
  json entries = json::array();
  for (const auto& [word, count] : t.entries) entries.push_back({{"word", word}, {"count", count}});
  return json{{"label", t.label}, {"entries", entries}};
}

std::string frequency_to_svg(const FrequencyTable& t) {
  std::ostringstream out;
  const int width = 800;
  int y = 0;
  std::size_t max_count = 1;
  for (const auto& [w, c] : t.entries) max_count = std::max(max_count, c);
  std::ostringstream body;
  for (const auto& [word, count] : t.entries) {
    int size = 10 + static_cast<int>(30.0 * static_cast<double>(count) /
                                     static_cast<double>(max_count));
    y += size + 6;
    body << "  <text x=\"10\" y=\"" << y << "\" font-size=\"" << size
         << "\" font-family=\"sans-serif\">" << word << " (" << count << ")</text>\n";
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << (y + 20) << "\">\n"
      << body.str() << "</svg>\n";
  return out.str();
}

}  // namespace sempl
