#include "wordgaze/analytics.hpp"
#include "wordgaze/csv.hpp"
#include "wordgaze/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace wordgaze {

std::string to_hex(Rgb c)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

void ColorScaleConfig::validate() const
{
    if (!(0.0 < scan_max_ms && scan_max_ms <= heat_min_ms && heat_min_ms < heat_max_ms))
        throw ContractViolation("color scale requires 0 < scan_max <= heat_min < heat_max");
    if (stops.size() < 2)
        throw ContractViolation("color scale needs at least two stops");
}

nlohmann::json ColorScaleConfig::to_json() const
{
    nlohmann::json s = nlohmann::json::array();
    for (auto c : stops)
        s.push_back(to_hex(c));
    return {{"scan_max_ms", scan_max_ms},
            {"heat_min_ms", heat_min_ms},
            {"heat_max_ms", heat_max_ms},
            {"stops", s},
            {"scan_color", to_hex(scan_color)}};
}

WordColor color_for(double total_ms, const ColorScaleConfig& cfg)
{
    if (!(total_ms >= 0.0))
        throw ContractViolation("color_for: negative or NaN dwell");
    if (total_ms == 0.0)
        return {ColorCategory::None, 0.0};
    if (total_ms <= cfg.scan_max_ms)
        return {ColorCategory::Scan, 0.0};
    const double f = (total_ms - cfg.heat_min_ms) / (cfg.heat_max_ms - cfg.heat_min_ms);
    return {ColorCategory::Heat, std::clamp(f, 0.0, 1.0)};
}

Rgb to_rgb(WordColor color, const ColorScaleConfig& cfg)
{
    switch (color.category) {
    case ColorCategory::None: return {0xff, 0xff, 0xff};
    case ColorCategory::Scan: return cfg.scan_color;
    case ColorCategory::Heat: break;
    }
    const double pos = std::clamp(color.heat, 0.0, 1.0) * static_cast<double>(cfg.stops.size() - 1);
    const auto k = std::min(static_cast<std::size_t>(pos), cfg.stops.size() - 2);
    const double f = pos - static_cast<double>(k);
    auto mix = [f](std::uint8_t a, std::uint8_t b) {
        return static_cast<std::uint8_t>(std::lround(a + (static_cast<double>(b) - a) * f));
    };
    const Rgb a = cfg.stops[k], b = cfg.stops[k + 1];
    return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

nlohmann::json AoiMetrics::to_json() const
{
    return {{"labels", labels},
            {"fixation_time_ms", fixation_time_ms},
            {"words_fixated", words_fixated},
            {"chars_fixated", chars_fixated},
            {"word_count_in_aoi", word_count_in_aoi},
            {"percent_words_fixated", percent_words_fixated}};
}

namespace {

std::map<std::size_t, const WordEyeFixation*> index_entries(std::span<const WordEyeFixation> wef,
                                                            const PageSnapshot& snap)
{
    std::map<std::size_t, const WordEyeFixation*> by_word;
    for (const auto& e : wef) {
        if (e.word_id >= snap.words.size() || snap.words[e.word_id].char_start != e.char_start ||
            e.stimulus_id != snap.stimulus_id)
            throw ContractViolation("word-eye-fixation for word " + std::to_string(e.word_id) +
                                    " does not belong to snapshot " + snap.layout_hash);
        by_word[e.word_id] = &e;
    }
    return by_word;
}

} // namespace

AoiMetrics aoi_metrics(std::span<const WordEyeFixation> wef, const PageSnapshot& snap,
                       const std::set<std::string>& labels, AoiMode mode)
{
    const auto by_word = index_entries(wef, snap);
    AoiMetrics m;
    m.labels.assign(labels.begin(), labels.end());
    const auto words = words_in_aoi(snap, labels, mode);
    m.word_count_in_aoi = words.size();
    for (std::size_t id : words) {
        auto it = by_word.find(id);
        if (it == by_word.end() || !(it->second->total_ms > 0.0))
            continue;
        m.fixation_time_ms += it->second->total_ms;
        ++m.words_fixated;
        m.chars_fixated += utf8::length(snap.words[id].text);
    }
    m.percent_words_fixated =
        m.word_count_in_aoi ? static_cast<double>(m.words_fixated) / static_cast<double>(m.word_count_in_aoi) : 0.0;
    return m;
}

std::vector<RenderSegment> collapse_runs(const PageSnapshot& snap, std::span<const WordEyeFixation> wef,
                                         std::optional<std::size_t> hide_threshold, const ColorScaleConfig& cfg)
{
    if (hide_threshold && *hide_threshold == 0)
        throw ContractViolation("collapse_runs: hide threshold must be >= 1");
    std::vector<double> totals(snap.words.size(), 0.0);
    for (const auto& [id, e] : index_entries(wef, snap))
        totals[id] = e->total_ms;

    std::vector<RenderSegment> out;
    std::size_t run_start = 0, run_len = 0;
    auto flush = [&] {
        if (run_len == 0)
            return;
        if (hide_threshold && run_len >= *hide_threshold) {
            RenderSegment s;
            s.kind = RenderSegment::Kind::Ellipsis;
            s.hidden_count = run_len;
            out.push_back(s);
        } else {
            for (std::size_t k = run_start; k < run_start + run_len; ++k)
                out.push_back(RenderSegment{RenderSegment::Kind::Word, k, 0.0, WordColor{}, 0});
        }
        run_len = 0;
    };
    for (std::size_t i = 0; i < totals.size(); ++i) {
        if (totals[i] > 0.0) {
            flush();
            out.push_back(RenderSegment{RenderSegment::Kind::Word, i, totals[i], color_for(totals[i], cfg), 0});
        } else {
            if (run_len == 0)
                run_start = i;
            ++run_len;
        }
    }
    flush();
    return out;
}

AnnotationMap parse_annotations(const nlohmann::json& doc)
{
    if (!doc.is_array())
        throw ValidationError("annotations must be a JSON array", {"top-level value is not an array"});
    AnnotationMap out;
    std::vector<std::string> diag;
    auto scalar = [](const nlohmann::json& v) -> std::string {
        if (v.is_string())
            return v.get<std::string>();
        if (v.is_null())
            return "";
        return v.dump();
    };
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& e = doc[i];
        if (!e.is_object() || !e.contains("participant") || !e.contains("stimulus")) {
            diag.push_back("entry " + std::to_string(i) + ": needs participant and stimulus");
            continue;
        }
        SessionKey key{scalar(e.at("participant")), scalar(e.at("stimulus"))};
        auto& values = out[key].values;
        auto put = [&](const std::string& k, const nlohmann::json& v) {
            if (v.is_object() || v.is_array()) {
                diag.push_back("entry " + std::to_string(i) + ": value of '" + k + "' must be a scalar");
                return;
            }
            if (!values.emplace(k, scalar(v)).second)
                diag.push_back("entry " + std::to_string(i) + ": duplicate key '" + k + "' for " +
                               key.participant_id + "/" + key.stimulus_id);
        };
        for (auto it = e.begin(); it != e.end(); ++it) {
            const std::string k = it.key();
            if (k == "participant" || k == "stimulus")
                continue;
            if (k == "values" && it->is_object()) {
                for (auto vt = it->begin(); vt != it->end(); ++vt)
                    put(vt.key(), *vt);
            } else {
                put(k, *it);
            }
        }
    }
    if (!diag.empty()) {
        const std::string what = "annotations rejected: " + diag.front();
        throw ValidationError(what, std::move(diag));
    }
    return out;
}

nlohmann::json annotations_to_json(const AnnotationMap& annotations)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [key, a] : annotations)
        out.push_back({{"participant", key.participant_id}, {"stimulus", key.stimulus_id}, {"values", a.values}});
    return out;
}

nlohmann::json Table::to_json() const { return {{"columns", columns}, {"rows", rows}}; }

namespace {

std::string format_fraction(double f)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", f);
    return buf;
}

std::string join_labels(const std::vector<std::string>& labels)
{
    std::string s;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i)
            s.push_back(' ');
        s += labels[i];
    }
    return s;
}

template <class T>
std::vector<const T*> chronological(std::span<const T> items)
{
    std::vector<const T*> order;
    for (const auto& s : items)
        order.push_back(&s);
    std::stable_sort(order.begin(), order.end(), [](const T* a, const T* b) {
        if (a->key.participant_id != b->key.participant_id)
            return a->key.participant_id < b->key.participant_id;
        return a->chronological_index < b->chronological_index;
    });
    return order;
}

template <class T>
std::vector<std::string> annotation_columns(const std::vector<const T*>& order, const AnnotationMap& annotations)
{
    std::set<std::string> keys;
    for (const T* s : order)
        if (auto it = annotations.find(s->key); it != annotations.end())
            for (const auto& [k, v] : it->second.values)
                keys.insert(k);
    return {keys.begin(), keys.end()};
}

void append_annotations(std::vector<std::string>& row, const SessionKey& key, const std::vector<std::string>& keys,
                        const AnnotationMap& annotations)
{
    const auto it = annotations.find(key);
    for (const auto& k : keys) {
        if (it == annotations.end()) {
            row.emplace_back();
            continue;
        }
        auto v = it->second.values.find(k);
        row.push_back(v == it->second.values.end() ? std::string() : v->second);
    }
}

} // namespace

Table table_rows(std::span<const SessionMetrics> sessions, const AnnotationMap& annotations)
{
    const auto order = chronological(sessions);
    const auto keys = annotation_columns(order, annotations);
    Table t;
    t.columns = {"participant",   "stimulus",       "chronological_index", "aoi",
                 "fixation_time_ms", "words_fixated", "chars_fixated",       "word_count_in_aoi",
                 "percent_words_fixated"};
    t.columns.insert(t.columns.end(), keys.begin(), keys.end());
    for (const SessionMetrics* s : order) {
        std::vector<std::string> row{s->key.participant_id,
                                     s->key.stimulus_id,
                                     std::to_string(s->chronological_index),
                                     join_labels(s->metrics.labels),
                                     csv::format_ms(s->metrics.fixation_time_ms),
                                     std::to_string(s->metrics.words_fixated),
                                     std::to_string(s->metrics.chars_fixated),
                                     std::to_string(s->metrics.word_count_in_aoi),
                                     format_fraction(s->metrics.percent_words_fixated)};
        append_annotations(row, s->key, keys, annotations);
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table word_table_rows(std::span<const SessionWords> sessions, const AnnotationMap& annotations)
{
    const auto order = chronological(sessions);
    const auto keys = annotation_columns(order, annotations);
    Table t;
    t.columns = {"participant", "stimulus", "chronological_index", "word_id", "word",
                 "char_start",  "total_ms", "first_seen_ms",       "last_seen_ms"};
    t.columns.insert(t.columns.end(), keys.begin(), keys.end());
    for (const SessionWords* s : order) {
        for (const auto& e : s->entries) {
            std::vector<std::string> row{s->key.participant_id,
                                         s->key.stimulus_id,
                                         std::to_string(s->chronological_index),
                                         std::to_string(e.word_id),
                                         e.word,
                                         std::to_string(e.char_start),
                                         csv::format_ms(e.total_ms),
                                         csv::format_ms(e.first_seen_ms),
                                         csv::format_ms(e.last_seen_ms)};
            append_annotations(row, s->key, keys, annotations);
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

void sort_table(Table& table, const std::string& column, bool descending)
{
    const auto it = std::find(table.columns.begin(), table.columns.end(), column);
    if (it == table.columns.end())
        throw ContractViolation("sort_table: no column '" + column + "'");
    const auto c = static_cast<std::size_t>(it - table.columns.begin());
    auto less = [c](const std::vector<std::string>& a, const std::vector<std::string>& b) {
        double x = 0, y = 0;
        if (csv::parse_double(a[c], x) && csv::parse_double(b[c], y))
            return x < y;
        return a[c] < b[c];
    };
    if (descending)
        std::stable_sort(table.rows.begin(), table.rows.end(),
                         [&](const auto& a, const auto& b) { return less(b, a); });
    else
        std::stable_sort(table.rows.begin(), table.rows.end(), less);
}

// ---------------------------------------------------------------------------
// Export

namespace {

const std::vector<std::string> plain_header{"participant",  "stimulus",      "word",        "char_start",
                                            "total_ms",     "first_seen_ms", "last_seen_ms"};

std::string escape_id(const std::string& id)
{
    std::string out;
    for (char c : id) {
        if (c == '%' || c == '=' || c == ';') {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", static_cast<unsigned char>(c));
            out += buf;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::string unescape_id(std::string_view s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
            i += 2;
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string format_breakdown(const std::vector<std::pair<std::string, double>>& parts)
{
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i)
            s.push_back(';');
        s += escape_id(parts[i].first) + "=" + csv::format_ms(parts[i].second);
    }
    return s;
}

WefCsvRow row_from(const WordEyeFixation& e)
{
    return WefCsvRow{e.participant_id, e.stimulus_id, e.word,           e.char_start,
                     e.total_ms,       e.first_seen_ms, e.last_seen_ms, std::nullopt, {}};
}

} // namespace

std::string export_rows_csv(std::span<const WefCsvRow> rows)
{
    const bool merged = std::any_of(rows.begin(), rows.end(), [](const WefCsvRow& r) { return r.contributors.has_value(); });
    std::ostringstream out;
    auto header = plain_header;
    if (merged) {
        header.push_back("contributors");
        header.push_back("per_participant");
    }
    csv::write_row(out, header);
    auto opt_ms = [](const std::optional<double>& v) { return v ? csv::format_ms(*v) : std::string(); };
    for (const auto& r : rows) {
        std::vector<std::string> f{r.participant, r.stimulus, r.word, std::to_string(r.char_start),
                                   csv::format_ms(r.total_ms), opt_ms(r.first_seen_ms), opt_ms(r.last_seen_ms)};
        if (merged) {
            f.push_back(r.contributors ? std::to_string(*r.contributors) : std::string());
            f.push_back(format_breakdown(r.per_participant));
        }
        csv::write_row(out, f);
    }
    return out.str();
}

std::string export_wef_csv(std::span<const WordEyeFixation> entries)
{
    std::vector<WefCsvRow> rows;
    rows.reserve(entries.size());
    for (const auto& e : entries)
        rows.push_back(row_from(e));
    return export_rows_csv(rows);
}

std::string export_merged_csv(const std::string& stimulus_id, std::span<const MergedWordFixation> entries)
{
    std::vector<WefCsvRow> rows;
    rows.reserve(entries.size());
    for (const auto& m : entries) {
        WefCsvRow r;
        r.stimulus = stimulus_id;
        r.word = m.word;
        r.char_start = m.char_start;
        r.total_ms = m.total_ms;
        r.contributors = m.contributors;
        for (const auto& [p, d] : m.per_participant)
            r.per_participant.emplace_back(p, d.total_ms);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) {
        std::ostringstream out;
        auto header = plain_header;
        header.push_back("contributors");
        header.push_back("per_participant");
        csv::write_row(out, header);
        return out.str();
    }
    return export_rows_csv(rows);
}

std::vector<WefCsvRow> parse_wef_csv(std::istream& in)
{
    std::vector<std::string> header, f;
    std::string scratch;
    if (!csv::read_record(in, ',', header, scratch))
        throw ValidationError("word-eye-fixation CSV is empty", {"no header"});
    auto merged_header = plain_header;
    merged_header.push_back("contributors");
    merged_header.push_back("per_participant");
    const bool merged = header == merged_header;
    if (!merged && header != plain_header)
        throw ValidationError("unexpected word-eye-fixation CSV header", {});

    std::vector<WefCsvRow> rows;
    std::size_t line = 1;
    auto fail = [&](const std::string& what) {
        throw ValidationError("word-eye-fixation CSV line " + std::to_string(line) + ": " + what, {});
    };
    auto opt_ms = [&](const std::string& cell) -> std::optional<double> {
        if (cell.empty())
            return std::nullopt;
        double v = 0;
        if (!csv::parse_double(cell, v))
            fail("bad number '" + cell + "'");
        return v;
    };
    while (csv::read_record(in, ',', f, scratch)) {
        ++line;
        if (f.size() == 1 && f[0].empty())
            continue;
        if (f.size() != header.size())
            fail("wrong field count");
        WefCsvRow r;
        r.participant = f[0];
        r.stimulus = f[1];
        r.word = f[2];
        double cs = 0;
        if (!csv::parse_double(f[3], cs) || cs < 0 || cs != std::floor(cs))
            fail("bad char_start");
        r.char_start = static_cast<std::size_t>(cs);
        if (!csv::parse_double(f[4], r.total_ms))
            fail("bad total_ms");
        r.first_seen_ms = opt_ms(f[5]);
        r.last_seen_ms = opt_ms(f[6]);
        if (merged) {
            if (!f[7].empty()) {
                double c = 0;
                if (!csv::parse_double(f[7], c) || c < 0)
                    fail("bad contributors");
                r.contributors = static_cast<std::size_t>(c);
            }
            std::string_view rest = f[8];
            while (!rest.empty()) {
                const auto semi = rest.find(';');
                const std::string_view part = rest.substr(0, semi);
                const auto eq = part.find('=');
                double v = 0;
                if (eq == std::string_view::npos || !csv::parse_double(part.substr(eq + 1), v))
                    fail("bad per_participant entry");
                r.per_participant.emplace_back(unescape_id(part.substr(0, eq)), v);
                rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
            }
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::map<std::string, std::vector<double>> sum_by_char_ranges(std::span<const WefCsvRow> rows,
                                                              std::span<const CharRange> ranges)
{
    std::map<std::string, std::vector<double>> out;
    auto add = [&](const std::string& participant, std::size_t pos, double ms) {
        auto& sums = out.try_emplace(participant, ranges.size(), 0.0).first->second;
        for (std::size_t k = 0; k < ranges.size(); ++k)
            if (pos >= ranges[k].begin && pos < ranges[k].end)
                sums[k] += ms;
    };
    for (const auto& r : rows) {
        if (r.contributors) {
            for (const auto& [p, ms] : r.per_participant)
                add(p, r.char_start, ms);
        } else {
            add(r.participant, r.char_start, r.total_ms);
        }
    }
    return out;
}

} // namespace wordgaze
