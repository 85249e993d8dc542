#include "wordgaze/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace wordgaze::csv {

bool split_record(std::string_view line, char delimiter, std::vector<std::string>& fields)
{
    fields.clear();
    std::string cell;
    bool in_quotes = false;
    bool quoted_cell = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"' && !quoted_cell && cell.empty()) {
            in_quotes = true;
            quoted_cell = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(cell));
            cell.clear();
            quoted_cell = false;
        } else {
            cell.push_back(c);
        }
    }
    if (in_quotes)
        return false;
    fields.push_back(std::move(cell));
    return true;
}

bool read_record(std::istream& in, char delimiter, std::vector<std::string>& fields, std::string& scratch)
{
    scratch.clear();
    std::string line;
    if (!std::getline(in, line))
        return false;
    for (;;) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        scratch += line;
        if (split_record(scratch, delimiter, fields))
            return true;
        if (!std::getline(in, line)) {
            // unterminated quote at EOF: take what we have
            scratch.push_back('"');
            split_record(scratch, delimiter, fields);
            return true;
        }
        scratch.push_back('\n');
    }
}

std::string quote(std::string_view field, char delimiter)
{
    const bool needs = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos ||
                       (!field.empty() && (field.front() == ' ' || field.back() == ' '));
    if (!needs)
        return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"')
            out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields, char delimiter)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            out.put(delimiter);
        out << quote(fields[i], delimiter);
    }
    out.put('\n');
}

std::string format_ms(double ms)
{
    const double tenths = std::round(ms * 10.0);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", tenths / 10.0);
    std::string s = buf;
    if (s.size() >= 2 && s.compare(s.size() - 2, 2, ".0") == 0)
        s.resize(s.size() - 2);
    if (s == "-0")
        s = "0";
    return s;
}

bool parse_double(std::string_view text, double& out)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t'))
        text.remove_suffix(1);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    if (text.empty())
        return false;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

} // namespace wordgaze::csv
