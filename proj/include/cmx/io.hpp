#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace cmx {

// ---------------------------------------------------------------------------
// Stream ingestion: UTF-8 lines "item<TAB>count"; a missing count means 1.

class IngestError : public std::runtime_error {
 public:
  IngestError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct IngestStats {
  std::size_t lines_read = 0;
  std::size_t records = 0;
  std::size_t skipped = 0;
};

/// Parses one stream line. Returns false (with `error` set) on a malformed line.
inline bool parse_stream_line(std::string_view line, std::string_view& item, std::int64_t& count, std::string& error) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto tab = line.find('\t');
  item = line.substr(0, tab);
  if (item.empty()) {
    error = "empty item";
    return false;
  }
  if (tab == std::string_view::npos) {
    count = 1;
    return true;
  }
  std::string_view field = line.substr(tab + 1);
  if (field.empty()) {
    count = 1;
    return true;
  }
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), count);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    error = "malformed count '" + std::string(field) + "'";
    return false;
  }
  if (count < 0) {
    error = "negative count";
    return false;
  }
  return true;
}

/// Calls fn(item, count) for every record. Blank lines are ignored. In strict mode the first
/// malformed line throws IngestError; otherwise malformed lines are skipped and counted.
template <class Fn>
IngestStats for_each_record(std::istream& in, bool strict, Fn&& fn) {
  IngestStats stats;
  std::string line;
  std::string error;
  while (std::getline(in, line)) {
    ++stats.lines_read;
    if (line.empty() || line == "\r") continue;
    std::string_view item;
    std::int64_t count = 0;
    if (!parse_stream_line(line, item, count, error)) {
      if (strict) throw IngestError(stats.lines_read, error);
      ++stats.skipped;
      continue;
    }
    fn(item, count);
    ++stats.records;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Minimal RFC 4180 CSV.

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << '\n';
}

/// Reads all rows of a CSV document.
inline std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Shortest decimal text that round-trips to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, ptr);
}

}  // namespace cmx
