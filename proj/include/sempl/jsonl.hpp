#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace sempl {

using json = nlohmann::json;

// Parses one JSON object per line. `on_bad_line` decides what happens to a
// line that does not parse (skip-with-warning for caches, throw for data).
std::vector<json> read_jsonl(const std::string& path,
                             const std::function<void(std::size_t, const std::string&)>& on_bad_line);

// Strict variant: any bad line raises DataError naming the line number.
std::vector<json> read_jsonl(const std::string& path);

std::string to_jsonl(const std::vector<json>& records);

void write_jsonl(const std::string& path, const std::vector<json>& records);

}  // namespace sempl
