#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lbc::csv {

struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based physical line where the record starts
};

/// RFC-4180 reader: comma separated, optional double-quote quoting with ""
/// escapes, quoted fields may span lines, CRLF or LF endings. A trailing
/// newline does not produce an empty record; blank lines are skipped.
std::vector<Record> parse(std::string_view text);

/// Quote a field if it contains a comma, quote, CR/LF or leading/trailing space.
std::string escape_field(std::string_view field);

std::string format_record(const std::vector<std::string>& fields);

}  // namespace lbc::csv
