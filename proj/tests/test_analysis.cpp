#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "sempl/analysis.hpp"
#include "sempl/errors.hpp"

using namespace sempl;

namespace {

const std::string kData = SEMPL_TEST_DATA_DIR;

DatasetBundle two_events() {
  DatasetBundle b;
  b.events.push_back({{"man", "eat", "apple"}, 1, DatasetId::PEP3K, Split::train});
  b.events.push_back({{"man", "eat", "stone"}, 1, DatasetId::PEP3K, Split::train});
  return b;
}

FrequencyTable table_of(int label, std::vector<std::pair<std::string, std::size_t>> entries) {
  FrequencyTable t;
  t.label = label;
  t.entries = std::move(entries);
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("top_words counts, lowercases, and breaks ties lexicographically") {
  FrequencyTable t = top_words(two_events(), 1, 2);
  REQUIRE(t.entries.size() == 2);
  // man and eat both occur twice; "eat" < "man"
  CHECK(t.entries[0] == std::pair<std::string, std::size_t>{"eat", 2});
  CHECK(t.entries[1] == std::pair<std::string, std::size_t>{"man", 2});
}

TEST_CASE("top_words edge cases") {
  CHECK(top_words(two_events(), 0, 3).entries.empty());  // no implausible events

  FrequencyTable full = top_words(two_events(), 1, 100);
  CHECK(full.entries.size() == 4);  // man, eat, apple, stone

  FrequencyTable stopped = top_words(two_events(), 1, 100, {"man", "eat"});
  REQUIRE(stopped.entries.size() == 2);
  CHECK(stopped.entries[0].first == "apple");

  CHECK_THROWS_AS(top_words(two_events(), 1, 0), UsageError);
}

TEST_CASE("top_words splits multi-word fields") {
  DatasetBundle b;
  b.events.push_back({{"credit card", "pays", "bill"}, 1, DatasetId::PAP, Split::train});
  FrequencyTable t = top_words(b, 1, 10);
  REQUIRE(t.entries.size() == 4);
  CHECK(t.entries[0].first == "bill");  // all count 1, lexicographic
}

TEST_CASE("cosine similarity basics") {
  CHECK(cosine_similarity({1, 0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(cosine_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_similarity({1, 0}, {-1, 0}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine_similarity({1, 0}, {1, 0, 0}), UsageError);
}

TEST_CASE("label_similarity against hand-computed values") {
  FixtureWordVectors vectors(std::map<std::string, std::vector<double>>{
      {"a", {1, 0, 0}}, {"b", {0, 1, 0}}, {"c", {1, 1, 0}}});
  FrequencyTable plaus = table_of(1, {{"a", 3}, {"b", 2}});
  FrequencyTable implaus = table_of(0, {{"b", 2}, {"c", 1}});

  SimilarityMatrix m = label_similarity(plaus, implaus, vectors);
  REQUIRE(m.rows == std::vector<std::string>{"a", "b"});
  REQUIRE(m.cols == std::vector<std::string>{"b", "c"});
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(m.values[0][0] == doctest::Approx(0.0));         // a.b
  CHECK(m.values[0][1] == doctest::Approx(inv_sqrt2));   // a.c
  CHECK(m.values[1][0] == doctest::Approx(1.0));         // b.b
  CHECK(m.values[1][1] == doctest::Approx(inv_sqrt2));   // b.c
  for (const auto& row : m.values)
    for (double v : row) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }

  // identical word on both axes is excluded from the cross summary
  CHECK(m.mean_cross_similarity() == doctest::Approx((0.0 + inv_sqrt2 + inv_sqrt2) / 3.0));
}

TEST_CASE("unresolvable words are skipped and reported") {
  FixtureWordVectors vectors(std::map<std::string, std::vector<double>>{{"a", {1, 0}}});
  FrequencyTable plaus = table_of(1, {{"a", 2}, {"zzz", 1}});
  FrequencyTable implaus = table_of(0, {{"a", 1}});
  SimilarityMatrix m = label_similarity(plaus, implaus, vectors);
  CHECK(m.rows == std::vector<std::string>{"a"});
  CHECK(m.skipped == std::vector<std::string>{"zzz"});

  FrequencyTable empty = table_of(0, {{"yyy", 1}});
  CHECK_THROWS_AS(label_similarity(plaus, empty, vectors), DataError);
}

TEST_CASE("swapping the tables transposes the matrix") {
  FixtureWordVectors vectors(kData + "/vectors_small.txt");
  FrequencyTable a = table_of(1, {{"man", 2}, {"eat", 1}});
  FrequencyTable b = table_of(0, {{"stone", 2}, {"dog", 1}, {"apple", 1}});
  SimilarityMatrix ab = label_similarity(a, b, vectors);
  SimilarityMatrix ba = label_similarity(b, a, vectors);
  REQUIRE(ab.rows == ba.cols);
  REQUIRE(ab.cols == ba.rows);
  for (std::size_t i = 0; i < ab.rows.size(); ++i)
    for (std::size_t j = 0; j < ab.cols.size(); ++j)
      CHECK(ab.values[i][j] == doctest::Approx(ba.values[j][i]));
}

TEST_CASE("word vector file parsing") {
  FixtureWordVectors vectors(kData + "/vectors_small.txt");
  auto man = vectors.vector("man");
  REQUIRE(man.has_value());
  CHECK(man->size() == 4);
  CHECK((*man)[0] == doctest::Approx(1.0));
  CHECK(vectors.vector("MAN").has_value());  // lookups are lowercased
  CHECK_FALSE(vectors.vector("nonword").has_value());
}

TEST_CASE("csv and svg rendering") {
  FrequencyTable t = table_of(1, {{"apple", 3}, {"man", 1}});
  CHECK(frequency_to_svg(t).find("apple (3)") != std::string::npos);

  FixtureWordVectors vectors(std::map<std::string, std::vector<double>>{
      {"a", {1, 0}}, {"b", {0, 1}}});
  SimilarityMatrix m =
      label_similarity(table_of(1, {{"a", 1}}), table_of(0, {{"b", 1}}), vectors);
  CHECK(m.to_csv() == "word,b\na,0\n");
}

TEST_SUITE_END();
