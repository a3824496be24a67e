#include "sempl/corpus.hpp"

#include <algorithm>
#include <set>

#include "sempl/delimited.hpp"
#include "sempl/errors.hpp"
#include "sempl/util.hpp"

namespace sempl {

const std::vector<std::string>& reserved_markers() {
  static const std::vector<std::string> markers = {
      "[EVT]",  "[/EVT]",  "[STYPE]", "[/STYPE]", "[OTYPE]", "[/OTYPE]",
      "[ETYPE]", "[/ETYPE]", "[DEF]",  "[/DEF]",  "<M>",     "</M>"};
  return markers;
}

bool contains_reserved_marker(const std::string& text) {
  for (const auto& m : reserved_markers()) {
    if (text.find(m) != std::string::npos) return true;
  }
  return false;
}

std::string to_string(DatasetId d) {
  switch (d) {
    case DatasetId::PEP3K: return "pep3k";
    case DatasetId::PAP: return "pap";
    case DatasetId::OTHER: return "other";
  }
  return "other";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

std::string to_string(Origin o) {
  return o == Origin::original ? "original" : "augmented";
}

DatasetId dataset_from_string(const std::string& s) {
  std::string v = to_lower(trim(s));
  if (v == "pep3k" || v == "pep-3k") return DatasetId::PEP3K;
  if (v == "pap") return DatasetId::PAP;
  if (v == "other") return DatasetId::OTHER;
  throw UsageError("unknown dataset id: " + s);
}

Split split_from_string(const std::string& s) {
  std::string v = to_lower(trim(s));
  if (v == "train") return Split::train;
  if (v == "dev" || v == "valid" || v == "validation") return Split::dev;
  if (v == "test") return Split::test;
  throw UsageError("unknown split: " + s);
}

Origin origin_from_string(const std::string& s) {
  std::string v = to_lower(trim(s));
  if (v == "original") return Origin::original;
  if (v == "augmented") return Origin::augmented;
  throw UsageError("unknown origin: " + s);
}

void EventTriple::validate(const std::string& where) const {
  auto check = [&](const std::string& field, const char* name) {
    std::string loc = where.empty() ? std::string() : where + ": ";
    if (trim(field).empty())
      throw DataError(loc + "empty " + name + " field");
    if (contains_reserved_marker(field))
      throw DataError(loc + std::string(name) + " contains a reserved marker token: " + field);
  };
  check(subject, "subject");
  check(verb, "verb");
  check(object, "object");
}

LabelCounts DatasetBundle::counts() const {
  LabelCounts c;
  for (const auto& e : events) (e.label == 1 ? c.plausible : c.implausible)++;
  return c;
}

LabelCounts DatasetBundle::counts(Split split) const {
  LabelCounts c;
  for (const auto& e : events) {
    if (e.split != split) continue;
    (e.label == 1 ? c.plausible : c.implausible)++;
  }
  return c;
}

std::map<Split, LabelCounts> DatasetBundle::counts_by_split() const {
  std::map<Split, LabelCounts> out;
  for (const auto& e : events) {
    auto& c = out[e.split];
    (e.label == 1 ? c.plausible : c.implausible)++;
  }
  return out;
}

namespace {

// Dedup key: triple + dataset. Contradictory labels within one key poison it.
struct KeyState {
  int label = -1;
  bool conflict = false;
};

std::vector<LabeledEvent> dedup_first_wins(const std::vector<LabeledEvent>& events,
                                           MergeStats* stats) {
  std::map<std::pair<EventTriple, DatasetId>, KeyState> keys;
  for (const auto& e : events) {
    auto& st = keys[{e.triple, e.dataset}];
    if (st.label == -1) {
      st.label = e.label;
    } else if (st.label != e.label) {
      st.conflict = true;
    }
  }
  std::size_t conflicts = 0;
  for (const auto& [k, st] : keys) {
    if (st.conflict) ++conflicts;
  }

  std::vector<LabeledEvent> out;
  out.reserve(events.size());
  std::set<std::pair<EventTriple, DatasetId>> emitted;
  std::size_t duplicates = 0;
  for (const auto& e : events) {
    auto key = std::make_pair(e.triple, e.dataset);
    if (keys[key].conflict) continue;  // both sides dropped
    if (!emitted.insert(key).second) {
      ++duplicates;
      continue;
    }
    out.push_back(e);
  }
  if (stats) {
    stats->duplicates_dropped += duplicates;
    stats->conflicts += conflicts;
  }
  return out;
}

}  // namespace

DatasetBundle load_events(const std::string& path, DatasetId dataset, Split split,
                          const ColumnMapping& columns, MergeStats* stats) {
  DelimitedTable table = read_delimited(path, columns.delimiter);
  if (table.header.empty())
    throw DataError(path + ": empty file");

  int si = table.column(columns.subject);
  int vi = table.column(columns.verb);
  int oi = table.column(columns.object);
  int li = table.column(columns.label);
  for (auto [idx, name] : {std::pair{si, &columns.subject}, {vi, &columns.verb},
                           {oi, &columns.object}, {li, &columns.label}}) {
    if (idx < 0)
      throw UsageError(path + ": missing column '" + *name + "'");
  }
  if (table.rows.empty())
    throw DataError(path + ": no data rows");

  std::vector<LabeledEvent> events;
  events.reserve(table.rows.size());
  int max_col = std::max({si, vi, oi, li});
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::string where = path + ": row " + std::to_string(r + 1);
    if (static_cast<int>(row.size()) <= max_col)
      throw DataError(where + ": expected at least " + std::to_string(max_col + 1) +
                      " fields, got " + std::to_string(row.size()));
    LabeledEvent e;
    e.triple = {trim(row[si]), trim(row[vi]), trim(row[oi])};
    e.triple.validate(where);
    std::string label = trim(row[li]);
    if (label == "0") {
      e.label = 0;
    } else if (label == "1") {
      e.label = 1;
    } else {
      throw DataError(where + ": non-binary label value '" + label + "'");
    }
    e.dataset = dataset;
    e.split = split;
    e.origin = Origin::original;
    events.push_back(std::move(e));
  }

  DatasetBundle bundle;
  bundle.events = dedup_first_wins(events, stats);
  return bundle;
}

DatasetBundle merge_splits(const std::vector<DatasetBundle>& bundles, Split target_split,
                           MergeStats* stats) {
  std::vector<LabeledEvent> all;
  for (const auto& b : bundles) {
    for (auto e : b.events) {
      e.split = target_split;
      all.push_back(std::move(e));
    }
  }
  DatasetBundle merged;
  merged.events = dedup_first_wins(all, stats);
  return merged;
}

SpanRole span_role_from_string(const std::string& s) {
  std::string v = to_lower(trim(s));
  if (v == "subject") return SpanRole::subject;
  if (v == "object") return SpanRole::object;
  throw UsageError("unsupported span role: " + s +
                   " (typing providers consume subject/object spans only)");
}

std::string realize_sentence(const EventTriple& triple) {
  return capitalize_first(triple.subject) + " " + triple.verb + " " + triple.object + ".";
}

std::string mark_span(const EventTriple& triple, SpanRole role) {
  // The sentence-initial capitalization applies inside the markers too:
  // "<M> Trader </M> ensures strategy." / "Trader ensures <M> strategy </M>."
  if (role == SpanRole::subject) {
    return "<M> " + capitalize_first(triple.subject) + " </M> " + triple.verb + " " +
           triple.object + ".";
  }
  return capitalize_first(triple.subject) + " " + triple.verb + " <M> " + triple.object +
         " </M>.";
}

json event_to_json(const LabeledEvent& e) {
  return json{{"subject", e.triple.subject}, {"verb", e.triple.verb},
              {"object", e.triple.object},   {"label", e.label},
              {"dataset", to_string(e.dataset)}, {"split", to_string(e.split)},
              {"origin", to_string(e.origin)}};
}

LabeledEvent event_from_json(const json& j) {
  LabeledEvent e;
  try {
    e.triple = {j.at("subject").get<std::string>(), j.at("verb").get<std::string>(),
                j.at("object").get<std::string>()};
    e.label = j.at("label").get<int>();
    e.dataset = dataset_from_string(j.at("dataset").get<std::string>());
    e.split = split_from_string(j.at("split").get<std::string>());
    e.origin = origin_from_string(j.at("origin").get<std::string>());
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad event record: ") + ex.what());
  }
  if (e.label != 0 && e.label != 1)
    throw DataError("bad event record: non-binary label " + std::to_string(e.label));
  e.triple.validate("event record");
  return e;
}

void write_events(const std::string& path, const DatasetBundle& bundle) {
  std::vector<json> records;
  records.reserve(bundle.events.size());
  for (const auto& e : bundle.events) records.push_back(event_to_json(e));
  write_jsonl(path, records);
}

DatasetBundle read_events(const std::string& path) {
  DatasetBundle bundle;
  for (const auto& j : read_jsonl(path)) bundle.events.push_back(event_from_json(j));
  return bundle;
}

}  // namespace sempl
