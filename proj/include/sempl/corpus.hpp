#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sempl/jsonl.hpp"

namespace sempl {

// The twelve reserved marker tokens. Event fields must not contain any of
// them; the templating and tokenizer layers treat them as atomic.
const std::vector<std::string>& reserved_markers();

bool contains_reserved_marker(const std::string& text);

enum class DatasetId { PEP3K, PAP, OTHER };
enum class Split { train, dev, test };
enum class Origin { original, augmented };

std::string to_string(DatasetId d);
std::string to_string(Split s);
std::string to_string(Origin o);
DatasetId dataset_from_string(const std::string& s);
Split split_from_string(const std::string& s);
Origin origin_from_string(const std::string& s);

struct EventTriple {
  std::string subject;
  std::string verb;
  std::string object;

  // Throws DataError when a field is empty after trimming or contains a
  // reserved marker. `where` names the offending location in messages.
  void validate(const std::string& where = "") const;

  bool operator==(const EventTriple&) const = default;
  auto operator<=>(const EventTriple&) const = default;
};

struct LabeledEvent {
  EventTriple triple;
  int label = 0;  // 0 implausible, 1 plausible
  DatasetId dataset = DatasetId::OTHER;
  Split split = Split::train;
  Origin origin = Origin::original;

  bool operator==(const LabeledEvent&) const = default;
};

struct LabelCounts {
  std::size_t plausible = 0;
  std::size_t implausible = 0;
  std::size_t total() const { return plausible + implausible; }
};

struct DatasetBundle {
  std::vector<LabeledEvent> events;

  LabelCounts counts() const;
  LabelCounts counts(Split split) const;
  std::map<Split, LabelCounts> counts_by_split() const;
};

// Names the subject/verb/object/label columns of a delimited file.
struct ColumnMapping {
  std::string subject = "subject";
  std::string verb = "verb";
  std::string object = "object";
  std::string label = "label";
  char delimiter = '\0';  // '\0' = infer from header line
};

struct MergeStats {
  std::size_t duplicates_dropped = 0;
  std::size_t conflicts = 0;  // (triple, dataset) keys with contradictory labels
};

// Loads a delimited file into a bundle. Malformed rows (bad label, empty or
// marker-bearing field) raise DataError naming the data row index (1-based,
// header excluded). Duplicate (triple, dataset, label) rows keep the first
// occurrence; contradictory labels for one (triple, dataset) drop all rows of
// that key and count one conflict.
DatasetBundle load_events(const std::string& path, DatasetId dataset, Split split,
                          const ColumnMapping& columns, MergeStats* stats = nullptr);

// Concatenates bundles into one split with the same first-wins/conflict-drop
// policy. Idempotent and order-stable.
DatasetBundle merge_splits(const std::vector<DatasetBundle>& bundles, Split target_split,
                           MergeStats* stats = nullptr);

// "trader ensures strategy" -> "Trader ensures strategy."
std::string realize_sentence(const EventTriple& triple);

enum class SpanRole { subject, object };

// Typing providers consume subject/object spans only; "verb" is rejected.
SpanRole span_role_from_string(const std::string& s);

// Wraps the role's surface token in <M> ... </M> within the realized
// sentence, e.g. "<M> Trader </M> ensures strategy."
std::string mark_span(const EventTriple& triple, SpanRole role);

// Canonical events JSONL: {"subject","verb","object","label","dataset","split","origin"}
json event_to_json(const LabeledEvent& e);
LabeledEvent event_from_json(const json& j);

void write_events(const std::string& path, const DatasetBundle& bundle);
DatasetBundle read_events(const std::string& path);

}  // namespace sempl
