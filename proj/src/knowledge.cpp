#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "sempl/knowledge.hpp"

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <iostream>
#include <thread>

#include "sempl/errors.hpp"
#include "sempl/util.hpp"

namespace sempl {

namespace {

// Provider text crosses a trust boundary; normalize whitespace so prompts
// stay single-line and reject anything carrying a reserved marker.
std::optional<std::string> sanitize_provider_text(const std::string& raw) {
  std::string s = collapse_spaces(raw);
  if (s.empty()) return std::nullopt;
  if (contains_reserved_marker(s)) return std::nullopt;
  return s;
}

std::vector<EntityTypePrediction> parse_entity_predictions(const json& arr,
                                                           const std::string& where) {
  std::vector<EntityTypePrediction> out;
  if (!arr.is_array()) throw DataError(where + ": 'types' is not an array");
  for (const auto& t : arr) {
    EntityTypePrediction p;
    p.kb_id = trim(t.value("kb_id", ""));
    auto label = sanitize_provider_text(t.value("label", ""));
    if (p.kb_id.empty() || !label) {
      std::cerr << "warning: " << where << ": dropping invalid type prediction\n";
      continue;
    }
    p.label = *label;
    if (t.contains("description") && t["description"].is_string())
      p.description = sanitize_provider_text(t["description"].get<std::string>());
    p.rank = static_cast<int>(out.size());
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<EventTypePrediction> parse_event_predictions(const json& arr,
                                                         const std::string& where) {
  std::vector<EventTypePrediction> out;
  if (!arr.is_array()) throw DataError(where + ": 'events' is not an array");
  for (const auto& t : arr) {
    EventTypePrediction p;
    auto trigger = sanitize_provider_text(t.value("trigger", ""));
    auto name = sanitize_provider_text(t.value("name", ""));
    p.node_id = trim(t.value("node_id", ""));
    if (!trigger || !name) {
      std::cerr << "warning: " << where << ": dropping invalid event prediction\n";
      continue;
    }
    p.trigger = *trigger;
    p.name = *name;
    if (t.contains("description") && t["description"].is_string())
      p.description = sanitize_provider_text(t["description"].get<std::string>());
    out.push_back(std::move(p));
  }
  return out;
}

json entity_prediction_to_json(const EntityTypePrediction& p) {
  json j{{"kb_id", p.kb_id}, {"label", p.label}, {"rank", p.rank}};
  if (p.description) j["description"] = *p.description;
  return j;
}

json event_prediction_to_json(const EventTypePrediction& p) {
  json j{{"trigger", p.trigger}, {"node_id", p.node_id}, {"name", p.name}};
  if (p.description) j["description"] = *p.description;
  return j;
}

// Retrying POST shared by the two model-serving providers.
json post_with_retry(const std::string& base_url, const std::string& path,
                     const json& body, const HttpRetryPolicy& retry,
                     const char* what) {
  int backoff = retry.initial_backoff_ms;
  std::string last_error = "no attempts made";
  for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
    httplib::Client client(base_url);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      json j = json::parse(res->body, nullptr, false);
      if (j.is_discarded())
        throw ProviderError(std::string(what) + ": response is not JSON", false);
      return j;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    throw ProviderError(std::string(what) + ": unexpected status " +
                            std::to_string(res->status),
                        false);
  }
  throw ProviderError(std::string(what) + " unavailable after " +
                      std::to_string(retry.max_attempts) + " attempts (" + last_error + ")");
}

}  // namespace

FixtureEntityTypingProvider::FixtureEntityTypingProvider(const std::string& path) {
  for (const auto& j : read_jsonl(path)) {
    std::string key = j.value("marked_sentence", "");
    if (key.empty())
      throw DataError(path + ": fixture record without 'marked_sentence'");
    table_[key] = parse_entity_predictions(j.value("types", json::array()), path);
  }
}

std::vector<EntityTypePrediction> FixtureEntityTypingProvider::type_entity(
    const std::string& marked_sentence) {
  auto it = table_.find(marked_sentence);
  if (it == table_.end()) {
    ++misses_;
    return {};
  }
  return it->second;
}

FixtureEventDetectionProvider::FixtureEventDetectionProvider(const std::string& path) {
  for (const auto& j : read_jsonl(path)) {
    std::string key = j.value("sentence", "");
    if (key.empty()) throw DataError(path + ": fixture record without 'sentence'");
    table_[key] = parse_event_predictions(j.value("events", json::array()), path);
  }
}

std::vector<EventTypePrediction> FixtureEventDetectionProvider::detect_events(
    const std::string& sentence) {
  auto it = table_.find(sentence);
  if (it == table_.end()) {
    ++misses_;
    return {};
  }
  return it->second;
}

HttpEntityTypingProvider::HttpEntityTypingProvider(std::string base_url, std::string path,
                                                   HttpRetryPolicy retry)
    : base_url_(std::move(base_url)), path_(std::move(path)), retry_(retry) {}

std::vector<EntityTypePrediction> HttpEntityTypingProvider::type_entity(
    const std::string& marked_sentence) {
  json body{{"sentence", marked_sentence}};
  json res = post_with_retry(base_url_, path_, body, retry_, "entity-typing provider");
  return parse_entity_predictions(res.value("types", json::array()), base_url_ + path_);
}

HttpEventDetectionProvider::HttpEventDetectionProvider(std::string base_url,
                                                       std::string path,
                                                       HttpRetryPolicy retry)
    : base_url_(std::move(base_url)), path_(std::move(path)), retry_(retry) {}

std::vector<EventTypePrediction> HttpEventDetectionProvider::detect_events(
    const std::string& sentence) {
  json body{{"sentence", sentence}};
  json res = post_with_retry(base_url_, path_, body, retry_, "event-detection provider");
  return parse_event_predictions(res.value("events", json::array()), base_url_ + path_);
}

HttpKbClient::HttpKbClient(KbClientConfig config) : config_(std::move(config)) {}

std::optional<std::string> HttpKbClient::fetch(const std::string& kb_id) {
  if (kb_id.empty()) throw UsageError("kb fetch: empty id");
  std::string path = "/wiki/Special:EntityData/" + kb_id + ".json";

  std::lock_guard<std::mutex> lock(mutex_);
  int backoff = config_.retry.initial_backoff_ms;
  std::string last_error = "no attempts made";
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
    // Rate limit: keep a minimum interval between requests.
    auto now = std::chrono::steady_clock::now();
    auto min_gap = std::chrono::milliseconds(config_.retry.min_interval_ms);
    if (last_request_.time_since_epoch().count() != 0 && now - last_request_ < min_gap)
      std::this_thread::sleep_for(min_gap - (now - last_request_));
    last_request_ = std::chrono::steady_clock::now();

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    client.set_follow_location(true);
    httplib::Headers headers{{"User-Agent", config_.user_agent}};
    auto res = client.Get(path, headers);
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 404) return std::nullopt;
    if (res->status >= 500 || res->status == 429) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw ProviderError("kb fetch " + kb_id + ": unexpected status " +
                              std::to_string(res->status),
                          false);
    json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded())
      throw ProviderError("kb fetch " + kb_id + ": response is not JSON", false);
    // Entity-data shape: entities.<id>.descriptions.<lang>.value
    auto entities = j.find("entities");
    if (entities == j.end() || !entities->is_object()) return std::nullopt;
    for (const auto& [id, entity] : entities->items()) {
      (void)id;  // redirects may resolve under a different id
      auto descriptions = entity.find("descriptions");
      if (descriptions == entity.end()) continue;
      auto lang = descriptions->find(config_.language);
      if (lang == descriptions->end()) continue;
      std::string value = lang->value("value", "");
      if (!value.empty()) return collapse_spaces(value);
    }
    return std::nullopt;
  }
  throw ProviderError("kb fetch " + kb_id + " failed after " +
                      std::to_string(config_.retry.max_attempts) + " attempts (" +
                      last_error + ")");
}

DefinitionCache::DefinitionCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;  // fresh cache
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("kb_id") ||
        !j.contains("definition")) {
      std::cerr << "warning: " << path_ << ": skipping corrupt cache line " << lineno
                << "\n";
      continue;
    }
    entries_[j["kb_id"].get<std::string>()] = j["definition"].get<std::string>();
  }
}

std::optional<std::string> DefinitionCache::get(const std::string& kb_id) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(kb_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::size_t DefinitionCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void DefinitionCache::put(const std::string& kb_id, const std::string& definition) {
  std::unique_lock lock(mutex_);
  if (entries_.count(kb_id)) return;
  entries_[kb_id] = definition;
  json j{{"kb_id", kb_id}, {"definition", definition}, {"fetched_at", utc_timestamp()}};
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw EnvError("cannot append to cache: " + path_);
  out << j.dump() << '\n';
}

std::optional<std::string> fetch_definition(const std::string& kb_id, KbClient& client,
                                            DefinitionCache& cache) {
  if (auto hit = cache.get(kb_id)) return hit;
  auto fetched = client.fetch(kb_id);
  if (fetched) cache.put(kb_id, *fetched);
  return fetched;
}

std::optional<EventTypePrediction> select_verb_event(
    const std::vector<EventTypePrediction>& predictions, const std::string& verb) {
  std::string wanted = to_lower(trim(verb));
  std::optional<EventTypePrediction> found;
  for (const auto& p : predictions) {
    if (to_lower(p.trigger) != wanted) continue;
    if (found)
      throw ProviderError("two event types predicted for trigger '" + verb +
                              "' (one type per trigger)",
                          false);
    found = p;
  }
  return found;
}

namespace {

// "DWD_Q53706" -> "Q53706"; plain Qids pass through.
std::optional<std::string> kb_id_from_node(const std::string& node_id) {
  if (starts_with(node_id, "DWD_Q")) return node_id.substr(4);
  if (starts_with(node_id, "Q") && node_id.size() > 1) return node_id;
  return std::nullopt;
}

std::vector<EntityTypePrediction> resolve_entity_types(
    std::vector<EntityTypePrediction> types, const ProviderSet& providers,
    const EnrichmentPolicy& policy) {
  std::vector<EntityTypePrediction> out;
  for (auto& t : types) {
    if (!t.description && providers.kb && providers.cache) {
      t.description = fetch_definition(t.kb_id, *providers.kb, *providers.cache);
      if (t.description) t.description = collapse_spaces(*t.description);
    }
    if (!t.description && policy.drop_types_without_definition) continue;
    t.rank = static_cast<int>(out.size());
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

EnrichedEvent enrich_event(const LabeledEvent& event, const ProviderSet& providers,
                           const EnrichmentPolicy& policy) {
  if (!providers.entity_typing || !providers.event_detection)
    throw UsageError("enrich_event: providers not configured");

  EnrichedEvent out;
  out.event = event;
  out.sentence = realize_sentence(event.triple);

  out.subject_types = resolve_entity_types(
      providers.entity_typing->type_entity(mark_span(event.triple, SpanRole::subject)),
      providers, policy);
  out.object_types = resolve_entity_types(
      providers.entity_typing->type_entity(mark_span(event.triple, SpanRole::object)),
      providers, policy);

  auto detections = providers.event_detection->detect_events(out.sentence);
  auto verb_type = select_verb_event(detections, event.triple.verb);
  if (verb_type && !verb_type->description && providers.kb && providers.cache) {
    if (auto qid = kb_id_from_node(verb_type->node_id))
      verb_type->description = fetch_definition(*qid, *providers.kb, *providers.cache);
  }
  // A verb type without a resolvable definition renders as unknown downstream,
  // so it is dropped here under the same policy as entity types.
  if (verb_type && !verb_type->description && policy.drop_types_without_definition)
    verb_type.reset();
  out.verb_type = std::move(verb_type);
  return out;
}

std::vector<EnrichedEvent> enrich_bundle(const DatasetBundle& bundle,
                                         const ProviderSet& providers,
                                         const EnrichmentPolicy& policy,
                                         unsigned workers) {
  std::vector<EnrichedEvent> out(bundle.events.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < bundle.events.size(); ++i)
      out[i] = enrich_event(bundle.events[i], providers, policy);
    return out;
  }
  std::vector<std::thread> threads;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  for (unsigned w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (!stop.load()) {
        std::size_t i = next.fetch_add(1);
        if (i >= bundle.events.size()) return;
        try {
          out[i] = enrich_event(bundle.events[i], providers, policy);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          stop = true;
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

json enriched_to_json(const EnrichedEvent& e) {
  json j;
  j["event"] = event_to_json(e.event);
  j["sentence"] = e.sentence;
  j["subject_types"] = json::array();
  for (const auto& t : e.subject_types) j["subject_types"].push_back(entity_prediction_to_json(t));
  j["object_types"] = json::array();
  for (const auto& t : e.object_types) j["object_types"].push_back(entity_prediction_to_json(t));
  j["verb_type"] = e.verb_type ? event_prediction_to_json(*e.verb_type) : json(nullptr);
  return j;
}

EnrichedEvent enriched_from_json(const json& j) {
  EnrichedEvent e;
  try {
    e.event = event_from_json(j.at("event"));
    e.sentence = j.at("sentence").get<std::string>();
    e.subject_types = parse_entity_predictions(j.value("subject_types", json::array()),
                                               "enriched record");
    e.object_types = parse_entity_predictions(j.value("object_types", json::array()),
                                              "enriched record");
    if (j.contains("verb_type") && !j["verb_type"].is_null()) {
      auto events = parse_event_predictions(json::array({j["verb_type"]}), "enriched record");
      if (!events.empty()) e.verb_type = events.front();
    }
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad enriched record: ") + ex.what());
  }
  return e;
}

void write_enriched(const std::string& path, const std::vector<EnrichedEvent>& events) {
  std::vector<json> records;
  records.reserve(events.size());
  for (const auto& e : events) records.push_back(enriched_to_json(e));
  write_jsonl(path, records);
}

std::vector<EnrichedEvent> read_enriched(const std::string& path) {
  std::vector<EnrichedEvent> out;
  for (const auto& j : read_jsonl(path)) out.push_back(enriched_from_json(j));
  return out;
}

}  // namespace sempl
