#pragma once

#include <string>
#include <vector>

#include "sempl/jsonl.hpp"
#include "sempl/knowledge.hpp"

namespace sempl {

// Knowledge configurations: both knowledge kinds, event types only, entity
// types only, or the plain event mention.
enum class PromptMode { evt_ent, evt, ent, baseline };

std::string to_string(PromptMode m);
PromptMode mode_from_string(const std::string& s);

struct PromptFlags {
  bool verb_unknown = false;
  bool subject_unknown = false;
  bool object_unknown = false;
  bool has_trivial_entity_type = false;

  bool operator==(const PromptFlags&) const = default;
};

struct PromptRecord {
  std::string prompt;
  int label = 0;
  DatasetId dataset = DatasetId::OTHER;
  Split split = Split::train;
  Origin origin = Origin::original;
  PromptMode mode = PromptMode::baseline;
  PromptFlags flags;
};

// Renders the enriched event under the given mode. Non-baseline prompts are
// up to four newline-joined sections: the [EVT]-wrapped sentence, then the
// subject, verb and object sections as the mode selects; sentences within a
// section are joined by single spaces. Baseline is the bare sentence.
PromptRecord render_prompt(const EnrichedEvent& enriched, PromptMode mode);

// Recovers the flags from a rendered prompt by marker scanning. Raises
// DataError on unbalanced markers.
PromptFlags inspect_prompt(const std::string& prompt);

// Prompts JSONL: {"prompt","label","dataset","split","mode","flags"}
json prompt_to_json(const PromptRecord& r);
PromptRecord prompt_from_json(const json& j);

void write_prompts(const std::string& path, const std::vector<PromptRecord>& records);
std::vector<PromptRecord> read_prompts(const std::string& path);

}  // namespace sempl
