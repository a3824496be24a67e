#include "sempl/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "sempl/errors.hpp"
#include "sempl/util.hpp"

namespace sempl {

std::vector<json> read_jsonl(
    const std::string& path,
    const std::function<void(std::size_t, const std::string&)>& on_bad_line) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open file: " + path);
  std::vector<json> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      on_bad_line(lineno, line);
      continue;
    }
    records.push_back(std::move(j));
  }
  return records;
}

std::vector<json> read_jsonl(const std::string& path) {
  return read_jsonl(path, [&path](std::size_t lineno, const std::string&) {
    throw DataError(path + ": malformed JSON at line " + std::to_string(lineno));
  });
}

std::string to_jsonl(const std::vector<json>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << r.dump() << '\n';
  return out.str();
}

void write_jsonl(const std::string& path, const std::vector<json>& records) {
  atomic_write_file(path, to_jsonl(records));
}

}  // namespace sempl
