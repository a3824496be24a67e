#include "sempl/delimited.hpp"

#include "sempl/errors.hpp"
#include "sempl/util.hpp"

namespace sempl {

int DelimitedTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

static std::vector<std::string> parse_record(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

DelimitedTable parse_delimited(const std::string& text, char delimiter) {
  DelimitedTable table;
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  if (lines.empty()) return table;

  char delim = delimiter;
  if (delim == '\0') delim = lines[0].find('\t') != std::string::npos ? '\t' : ',';

  table.header = parse_record(lines[0], delim);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    table.rows.push_back(parse_record(lines[i], delim));
  }
  return table;
}

DelimitedTable read_delimited(const std::string& path, char delimiter) {
  return parse_delimited(read_file(path), delimiter);
}

}  // namespace sempl
