#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "sempl/corpus.hpp"
#include "sempl/jsonl.hpp"

namespace sempl {

struct EntityTypePrediction {
  std::string kb_id;    // e.g. "Q43845"
  std::string label;    // e.g. "businessperson"
  std::optional<std::string> description;
  int rank = 0;         // position in provider output

  bool operator==(const EntityTypePrediction&) const = default;
};

struct EventTypePrediction {
  std::string trigger;  // surface token, e.g. "robs"
  std::string node_id;  // ontology node, e.g. "DWD_Q53706"
  std::string name;     // type name, e.g. "robbery"
  std::optional<std::string> description;

  bool operator==(const EventTypePrediction&) const = default;
};

struct EnrichedEvent {
  LabeledEvent event;
  std::string sentence;  // == realize_sentence(event.triple)
  std::vector<EntityTypePrediction> subject_types;
  std::vector<EntityTypePrediction> object_types;
  std::optional<EventTypePrediction> verb_type;
};

// ---------------------------------------------------------------------------
// Providers

class EntityTypingProvider {
 public:
  virtual ~EntityTypingProvider() = default;
  // `marked_sentence` carries exactly one <M> ... </M> span.
  virtual std::vector<EntityTypePrediction> type_entity(const std::string& marked_sentence) = 0;
};

class EventDetectionProvider {
 public:
  virtual ~EventDetectionProvider() = default;
  virtual std::vector<EventTypePrediction> detect_events(const std::string& sentence) = 0;
};

// Always returns no predictions; maps to the unknown-type templates downstream.
class StubEntityTypingProvider : public EntityTypingProvider {
 public:
  std::vector<EntityTypePrediction> type_entity(const std::string&) override { return {}; }
};

class StubEventDetectionProvider : public EventDetectionProvider {
 public:
  std::vector<EventTypePrediction> detect_events(const std::string&) override { return {}; }
};

// Replays recorded predictions from a JSONL fixture keyed by marked sentence:
//   {"marked_sentence": "...", "types": [{"kb_id","label","description"?}, ...]}
// Sentences absent from the fixture yield no predictions.
class FixtureEntityTypingProvider : public EntityTypingProvider {
 public:
  explicit FixtureEntityTypingProvider(const std::string& path);
  std::vector<EntityTypePrediction> type_entity(const std::string& marked_sentence) override;

  std::size_t misses() const { return misses_; }

 private:
  std::map<std::string, std::vector<EntityTypePrediction>> table_;
  std::size_t misses_ = 0;
};

// JSONL fixture keyed by plain sentence:
//   {"sentence": "...", "events": [{"trigger","node_id","name","description"?}, ...]}
class FixtureEventDetectionProvider : public EventDetectionProvider {
 public:
  explicit FixtureEventDetectionProvider(const std::string& path);
  std::vector<EventTypePrediction> detect_events(const std::string& sentence) override;

  std::size_t misses() const { return misses_; }

 private:
  std::map<std::string, std::vector<EventTypePrediction>> table_;
  std::size_t misses_ = 0;
};

struct HttpRetryPolicy {
  int max_attempts = 3;
  int initial_backoff_ms = 250;  // doubled per retry
  int min_interval_ms = 0;       // rate limit between requests
};

// POSTs {"sentence": ...} to a model-serving endpoint and expects the fixture
// record shape back ({"types":[...]} / {"events":[...]}).
class HttpEntityTypingProvider : public EntityTypingProvider {
 public:
  HttpEntityTypingProvider(std::string base_url, std::string path,
                           HttpRetryPolicy retry = {});
  std::vector<EntityTypePrediction> type_entity(const std::string& marked_sentence) override;

 private:
  std::string base_url_;
  std::string path_;
  HttpRetryPolicy retry_;
};

class HttpEventDetectionProvider : public EventDetectionProvider {
 public:
  HttpEventDetectionProvider(std::string base_url, std::string path,
                             HttpRetryPolicy retry = {});
  std::vector<EventTypePrediction> detect_events(const std::string& sentence) override;

 private:
  std::string base_url_;
  std::string path_;
  HttpRetryPolicy retry_;
};

// ---------------------------------------------------------------------------
// Knowledge-base client and definition cache

class KbClient {
 public:
  virtual ~KbClient() = default;
  // Definition ("description") for the id, or nullopt when the KB has none.
  // Transport failures raise ProviderError after bounded retries.
  virtual std::optional<std::string> fetch(const std::string& kb_id) = 0;
};

struct KbClientConfig {
  std::string base_url = "https://www.wikidata.org";
  std::string user_agent = "sempl/0.1 (event-plausibility pipeline)";
  std::string language = "en";
  HttpRetryPolicy retry = {3, 250, 100};
};

// Speaks the public entity-data endpoint: GET {base}/wiki/Special:EntityData/{id}.json
class HttpKbClient : public KbClient {
 public:
  explicit HttpKbClient(KbClientConfig config);
  std::optional<std::string> fetch(const std::string& kb_id) override;

 private:
  KbClientConfig config_;
  std::chrono::steady_clock::time_point last_request_{};
  std::mutex mutex_;
};

// In-memory client backed by a fixed table; used where no network is wanted.
class StaticKbClient : public KbClient {
 public:
  explicit StaticKbClient(std::map<std::string, std::string> table)
      : table_(std::move(table)) {}
  std::optional<std::string> fetch(const std::string& kb_id) override {
    auto it = table_.find(kb_id);
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::map<std::string, std::string> table_;
};

// Append-only JSONL cache, one {"kb_id","definition","fetched_at"} per line.
// Corrupt lines are skipped with a warning on load. Concurrent reads,
// serialized writes.
class DefinitionCache {
 public:
  explicit DefinitionCache(std::string path);

  std::optional<std::string> get(const std::string& kb_id) const;
  void put(const std::string& kb_id, const std::string& definition);
  std::size_t size() const;

 private:
  std::string path_;
  std::map<std::string, std::string> entries_;
  mutable std::shared_mutex mutex_;
};

// Cache-first definition lookup with write-through. nullopt = definition miss.
std::optional<std::string> fetch_definition(const std::string& kb_id, KbClient& client,
                                            DefinitionCache& cache);

// ---------------------------------------------------------------------------
// Enrichment

// The unique prediction whose trigger equals the verb (case-insensitive exact
// token match). Two matches violate the one-type-per-trigger contract.
std::optional<EventTypePrediction> select_verb_event(
    const std::vector<EventTypePrediction>& predictions, const std::string& verb);

struct EnrichmentPolicy {
  // Types whose definitions cannot be resolved are dropped rather than
  // rendered with an empty definition clause.
  bool drop_types_without_definition = true;
};

struct ProviderSet {
  EntityTypingProvider* entity_typing = nullptr;
  EventDetectionProvider* event_detection = nullptr;
  KbClient* kb = nullptr;               // optional; nullptr = no remote lookups
  DefinitionCache* cache = nullptr;     // optional
};

EnrichedEvent enrich_event(const LabeledEvent& event, const ProviderSet& providers,
                           const EnrichmentPolicy& policy = {});

// Enriches a whole bundle; `workers` > 1 enriches distinct events concurrently
// while keeping output order. Provider implementations must be thread-safe.
std::vector<EnrichedEvent> enrich_bundle(const DatasetBundle& bundle,
                                         const ProviderSet& providers,
                                         const EnrichmentPolicy& policy = {},
                                         unsigned workers = 1);

// Enriched JSONL round-trip.
json enriched_to_json(const EnrichedEvent& e);
EnrichedEvent enriched_from_json(const json& j);
void write_enriched(const std::string& path, const std::vector<EnrichedEvent>& events);
std::vector<EnrichedEvent> read_enriched(const std::string& path);

}  // namespace sempl
