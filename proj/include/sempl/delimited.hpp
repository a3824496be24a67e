#pragma once

#include <string>
#include <vector>

namespace sempl {

// Minimal delimited-text reader: UTF-8, header row, comma or tab separated,
// double-quote quoting with "" escapes. Enough for the event datasets; not a
// general CSV library.
struct DelimitedTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Returns the index of `name` in the header or -1.
  int column(const std::string& name) const;
};

// delimiter '\0' means: infer from the header line (tab if present, else comma).
DelimitedTable read_delimited(const std::string& path, char delimiter = '\0');

DelimitedTable parse_delimited(const std::string& text, char delimiter = '\0');

}  // namespace sempl
