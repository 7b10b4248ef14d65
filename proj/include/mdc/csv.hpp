#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mdc/pipeline.hpp"

namespace mdc::csv {

using Row = std::vector<std::string>;

// RFC-4180: quoted fields may contain commas, CRLF and doubled quotes.
std::vector<Row> parse(std::istream& in);
std::vector<Row> parse(std::string_view text);
void write_row(std::ostream& out, const Row& row);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

// ISO-8601 UTC timestamps "YYYY-MM-DDTHH:MM[:SS][Z]" <-> seconds since epoch.
std::int64_t parse_timestamp(std::string_view s);
std::string format_timestamp(std::int64_t seconds);

// Header: timestamp,P_1,Ptc_1,...,P_N,Ptc_N,feat_1,...,feat_F
void write_series(std::ostream& out, const pipeline::FlowgateSeries& series);
void write_series(const std::filesystem::path& path, const pipeline::FlowgateSeries& series);
pipeline::FlowgateSeries read_series(std::istream& in);
pipeline::FlowgateSeries read_series(const std::filesystem::path& path);

}  // namespace mdc::csv
