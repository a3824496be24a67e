#include "sempl/templating.hpp"

#include <algorithm>

#include "sempl/errors.hpp"
#include "sempl/util.hpp"

namespace sempl {

std::string to_string(PromptMode m) {
  switch (m) {
    case PromptMode::evt_ent: return "evt_ent";
    case PromptMode::evt: return "evt";
    case PromptMode::ent: return "ent";
    case PromptMode::baseline: return "baseline";
  }
  return "baseline";
}

PromptMode mode_from_string(const std::string& s) {
  std::string v = to_lower(trim(s));
  if (v == "evt_ent" || v == "evt+ent") return PromptMode::evt_ent;
  if (v == "evt") return PromptMode::evt;
  if (v == "ent") return PromptMode::ent;
  if (v == "baseline" || v == "bs") return PromptMode::baseline;
  throw UsageError("unknown prompt mode: " + s);
}

namespace {

constexpr const char* kUnknownSuffix = "\" has an unknown type.";

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

// Sections are sentences joined by single spaces; first type uses the basic
// template, the rest the "It can also have type ..." extension.
std::string entity_section(const std::string& role_word, const std::string& mention,
                           const std::string& open, const std::string& close,
                           const std::vector<EntityTypePrediction>& types) {
  if (types.empty())
    return "The " + role_word + " " + quoted(mention) + " has an unknown type.";
  std::string out;
  for (std::size_t i = 0; i < types.size(); ++i) {
    const auto& t = types[i];
    if (i == 0) {
      out += "The " + role_word + " " + quoted(mention) + " has type ";
    } else {
      out += " It can also have type ";
    }
    out += open + t.label + close + ", which means [DEF]" +
           t.description.value_or("") + "[/DEF].";
  }
  return out;
}

std::string verb_section(const std::string& verb,
                         const std::optional<EventTypePrediction>& verb_type) {
  if (!verb_type) return "The verb " + quoted(verb) + " has an unknown type.";
  return "The verb " + quoted(verb) + " has type [ETYPE]" + verb_type->name +
         "[/ETYPE], which means [DEF]" + verb_type->description.value_or("") + "[/DEF].";
}

bool has_entity_label(const std::vector<EntityTypePrediction>& types) {
  return std::any_of(types.begin(), types.end(),
                     [](const EntityTypePrediction& t) { return t.label == "entity"; });
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : s) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  lines.push_back(cur);
  return lines;
}

}  // namespace

PromptRecord render_prompt(const EnrichedEvent& enriched, PromptMode mode) {
  if (enriched.sentence.empty())
    throw UsageError("render_prompt: empty sentence");

  PromptRecord rec;
  rec.label = enriched.event.label;
  rec.dataset = enriched.event.dataset;
  rec.split = enriched.event.split;
  rec.origin = enriched.event.origin;
  rec.mode = mode;

  if (mode == PromptMode::baseline) {
    rec.prompt = enriched.sentence;
    return rec;
  }

  const bool ent = mode == PromptMode::evt_ent || mode == PromptMode::ent;
  const bool evt = mode == PromptMode::evt_ent || mode == PromptMode::evt;

  std::vector<std::string> sections;
  sections.push_back("[EVT] " + enriched.sentence + " [/EVT]");
  if (ent) {
    // Mentions use the surface form from the sentence: the subject is
    // sentence-initial and therefore capitalized, the object is verbatim.
    sections.push_back(entity_section("subject",
                                      capitalize_first(enriched.event.triple.subject),
                                      "[STYPE]", "[/STYPE]", enriched.subject_types));
  }
  if (evt) sections.push_back(verb_section(enriched.event.triple.verb, enriched.verb_type));
  if (ent) {
    sections.push_back(entity_section("object", enriched.event.triple.object, "[OTYPE]",
                                      "[/OTYPE]", enriched.object_types));
  }

  std::string prompt;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i) prompt += '\n';
    prompt += sections[i];
  }
  rec.prompt = std::move(prompt);

  rec.flags.subject_unknown = ent && enriched.subject_types.empty();
  rec.flags.object_unknown = ent && enriched.object_types.empty();
  rec.flags.verb_unknown = evt && !enriched.verb_type;
  rec.flags.has_trivial_entity_type =
      ent && (has_entity_label(enriched.subject_types) ||
              has_entity_label(enriched.object_types));
  return rec;
}

PromptFlags inspect_prompt(const std::string& prompt) {
  static const std::vector<std::pair<std::string, std::string>> kPairs = {
      {"[EVT]", "[/EVT]"},   {"[STYPE]", "[/STYPE]"}, {"[OTYPE]", "[/OTYPE]"},
      {"[ETYPE]", "[/ETYPE]"}, {"[DEF]", "[/DEF]"}};

  // Ordered scan of every marker occurrence; they must pair up flat,
  // open immediately matched by its own close.
  struct Hit {
    std::size_t pos;
    int pair;
    bool open;
    std::size_t len;
  };
  std::vector<Hit> hits;
  for (int p = 0; p < static_cast<int>(kPairs.size()); ++p) {
    for (const bool open : {true, false}) {
      const std::string& m = open ? kPairs[p].first : kPairs[p].second;
      std::size_t pos = prompt.find(m);
      while (pos != std::string::npos) {
        hits.push_back({pos, p, open, m.size()});
        pos = prompt.find(m, pos + 1);
      }
    }
  }
  // "[/EVT]" contains no other marker, but "[EVT]" is a substring of nothing;
  // positions are distinct because no marker is a prefix of another.
  std::sort(hits.begin(), hits.end(),
            [](const Hit& a, const Hit& b) { return a.pos < b.pos; });

  PromptFlags flags;
  std::optional<Hit> pending;
  for (const auto& h : hits) {
    if (!pending) {
      if (!h.open)
        throw DataError("malformed prompt: unmatched closing marker at offset " +
                        std::to_string(h.pos));
      pending = h;
      continue;
    }
    if (h.open || h.pair != pending->pair)
      throw DataError("malformed prompt: unbalanced markers at offset " +
                      std::to_string(h.pos));
    std::size_t content_begin = pending->pos + pending->len;
    std::string span = prompt.substr(content_begin, h.pos - content_begin);
    if ((kPairs[h.pair].first == "[STYPE]" || kPairs[h.pair].first == "[OTYPE]") &&
        span == "entity")
      flags.has_trivial_entity_type = true;
    pending.reset();
  }
  if (pending)
    throw DataError("malformed prompt: unclosed marker at offset " +
                    std::to_string(pending->pos));

  for (const auto& line : split_lines(prompt)) {
    if (!ends_with(line, kUnknownSuffix)) continue;
    if (contains_reserved_marker(line)) continue;
    if (starts_with(line, "The subject \"")) flags.subject_unknown = true;
    else if (starts_with(line, "The verb \"")) flags.verb_unknown = true;
    else if (starts_with(line, "The object \"")) flags.object_unknown = true;
  }
  return flags;
}

json prompt_to_json(const PromptRecord& r) {
  return json{{"prompt", r.prompt},
              {"label", r.label},
              {"dataset", to_string(r.dataset)},
              {"split", to_string(r.split)},
              {"mode", to_string(r.mode)},
              {"flags",
               {{"verb_unknown", r.flags.verb_unknown},
                {"subject_unknown", r.flags.subject_unknown},
                {"object_unknown", r.flags.object_unknown},
                {"has_trivial_entity_type", r.flags.has_trivial_entity_type}}}};
}

PromptRecord prompt_from_json(const json& j) {
  PromptRecord r;
  try {
    r.prompt = j.at("prompt").get<std::string>();
    r.label = j.at("label").get<int>();
    r.dataset = dataset_from_string(j.at("dataset").get<std::string>());
    r.split = split_from_string(j.at("split").get<std::string>());
    r.mode = mode_from_string(j.at("mode").get<std::string>());
    const auto& f = j.at("flags");
    r.flags.verb_unknown = f.value("verb_unknown", false);
    r.flags.subject_unknown = f.value("subject_unknown", false);
    r.flags.object_unknown = f.value("object_unknown", false);
    r.flags.has_trivial_entity_type = f.value("has_trivial_entity_type", false);
  } catch (const json::exception& ex) {
    throw DataError(std::string("bad prompt record: ") + ex.what());
  }
  if (r.label != 0 && r.label != 1)
    throw DataError("bad prompt record: non-binary label");
  return r;
}

void write_prompts(const std::string& path, const std::vector<PromptRecord>& records) {
  std::vector<json> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(prompt_to_json(r));
  write_jsonl(path, out);
}

std::vector<PromptRecord> read_prompts(const std::string& path) {
  std::vector<PromptRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(prompt_from_json(j));
  return out;
}

}  // namespace sempl
