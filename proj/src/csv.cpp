#include "mdc/csv.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "mdc/error.hpp"

namespace mdc::csv {

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false, field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char ch = text[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < text.size() && text[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field_started) throw std::invalid_argument("csv: stray quote inside unquoted field");
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (k + 1 < text.size() && text[k + 1] == '\n') ++k;
        end_row();
        break;
      case '\n':
        end_row();
        break;
      default:
        field += ch;
        field_started = true;
    }
  }
  if (quoted) throw std::invalid_argument("csv: unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

std::vector<Row> parse(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(std::string_view(text));
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (k) out << ',';
    const std::string& f = row[k];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      out << f;
      continue;
    }
    out << '"';
    for (char ch : f) {
      if (ch == '"') out << '"';
      out << ch;
    }
    out << '"';
  }
  out << "\r\n";
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("csv: not a number: '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_timestamp(std::string_view s) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char tail[8] = {0};
  const std::string str(s);
  int n = std::sscanf(str.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%7s", &y, &mo, &d, &h, &mi, &sec, tail);
  if (n < 6) {
    sec = 0;
    tail[0] = 0;
    n = std::sscanf(str.c_str(), "%4d-%2u-%2uT%2u:%2u%7s", &y, &mo, &d, &h, &mi, tail);
    if (n < 5) throw std::invalid_argument("bad ISO-8601 timestamp '" + str + "'");
  }
  if (tail[0] != 0 && std::string_view(tail) != "Z")
    throw std::invalid_argument("unsupported timestamp suffix in '" + str + "' (UTC only)");
  const std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(mo), std::chrono::day(d)};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw std::invalid_argument("invalid date in '" + str + "'");
  const auto days = std::chrono::sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + sec;
}

std::string format_timestamp(std::int64_t seconds) {
  std::int64_t days = seconds / 86400, rem = seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const std::chrono::year_month_day ymd{std::chrono::sys_days(std::chrono::days(days))};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60));
  return buf;
}

void write_series(std::ostream& out, const pipeline::FlowgateSeries& s) {
  s.validate();
  Row header{"timestamp"};
  for (std::size_t i = 1; i <= s.n_gates; ++i) {
    header.push_back("P_" + std::to_string(i));
    header.push_back("Ptc_" + std::to_string(i));
  }
  for (std::size_t j = 1; j <= s.n_features; ++j) header.push_back("feat_" + std::to_string(j));
  write_row(out, header);
  Row row;
  for (std::size_t t = 0; t < s.length(); ++t) {
    row.clear();
    row.push_back(s.timestamps[t]);
    for (std::size_t i = 0; i < s.n_gates; ++i) {
      row.push_back(format_double(s.flow[t * s.n_gates + i]));
      row.push_back(format_double(s.capacity[t * s.n_gates + i]));
    }
    for (std::size_t j = 0; j < s.n_features; ++j) row.push_back(format_double(s.features[t * s.n_features + j]));
    write_row(out, row);
  }
}

void write_series(const std::filesystem::path& path, const pipeline::FlowgateSeries& series) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_series(out, series);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

pipeline::FlowgateSeries read_series(std::istream& in) {
  const std::vector<Row> rows = parse(in);
  if (rows.empty()) throw std::invalid_argument("csv: empty file");
  const Row& header = rows.front();
  if (header.empty() || header[0] != "timestamp") throw std::invalid_argument("csv: first column must be 'timestamp'");
  pipeline::FlowgateSeries s;
  std::size_t col = 1;
  while (col + 1 < header.size() && header[col] == "P_" + std::to_string(s.n_gates + 1) &&
         header[col + 1] == "Ptc_" + std::to_string(s.n_gates + 1)) {
    ++s.n_gates;
    col += 2;
  }
  if (s.n_gates == 0) throw std::invalid_argument("csv: expected P_1,Ptc_1 after timestamp");
  for (; col < header.size(); ++col) {
    if (header[col] != "feat_" + std::to_string(s.n_features + 1))
      throw std::invalid_argument("csv: unexpected column '" + header[col] + "'");
    ++s.n_features;
  }
  std::int64_t prev = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const Row& row = rows[r];
    if (row.size() != header.size())
      throw std::invalid_argument("csv: row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                                  " fields, header has " + std::to_string(header.size()));
    const std::int64_t ts = parse_timestamp(row[0]);
    if (r == 2) {
      if (ts - prev <= 0 || (ts - prev) % 60 != 0) throw std::invalid_argument("csv: timestamps must increase in whole minutes");
      s.interval_minutes = (ts - prev) / 60;
    } else if (r > 2 && ts - prev != s.interval_minutes * 60) {
      throw std::invalid_argument("csv: non-uniform time step at row " + std::to_string(r + 1));
    }
    prev = ts;
    s.timestamps.push_back(row[0]);
    for (std::size_t i = 0; i < s.n_gates; ++i) {
      s.flow.push_back(parse_double(row[1 + 2 * i]));
      s.capacity.push_back(parse_double(row[2 + 2 * i]));
    }
    for (std::size_t j = 0; j < s.n_features; ++j) s.features.push_back(parse_double(row[1 + 2 * s.n_gates + j]));
  }
  s.validate();
  return s;
}

pipeline::FlowgateSeries read_series(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_series(in);
}

}  // namespace mdc::csv
