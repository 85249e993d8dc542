#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace wordgaze::csv {

/// Splits one record into fields. Handles RFC 4180 quoting ("" escapes a quote).
/// Returns false if the record ends inside an open quote; the caller should
/// append the next physical line and retry.
bool split_record(std::string_view line, char delimiter, std::vector<std::string>& fields);

/// Reads one logical record (which may span lines if a quoted field contains
/// a newline). Strips a trailing '\r'. Returns false at end of stream.
bool read_record(std::istream& in, char delimiter, std::vector<std::string>& fields,
                 std::string& scratch);

/// Quotes a field only when it needs it.
std::string quote(std::string_view field, char delimiter = ',');

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter = ',');

/// Decimal rendering with at most one fractional digit; "-0" is written as "0"
/// and a zero fraction is dropped (2562.4 -> "2562.4", 4219.0 -> "4219").
std::string format_ms(double ms);

bool parse_double(std::string_view text, double& out);

} // namespace wordgaze::csv
