#pragma once

#include "wordgaze/gaze_ingest.hpp"
#include "wordgaze/merge.hpp"
#include "wordgaze/snapshot.hpp"
#include "wordgaze/word_mapping.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace wordgaze {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

std::string to_hex(Rgb c);

/// Heat-coloring settings. The "fixation min/max" sliders map to heat_min_ms
/// and heat_max_ms; they only change colors, never the data.
struct ColorScaleConfig {
    double scan_max_ms = 100.0;
    double heat_min_ms = 100.0;
    double heat_max_ms = 800.0;
    std::vector<Rgb> stops{{0x3b, 0x6c, 0xf0}, {0x3c, 0xc0, 0x5a}, {0xf2, 0xe1, 0x3a},
                           {0xf5, 0x9a, 0x2b}, {0xe0, 0x2b, 0x2b}};
    Rgb scan_color{0xdc, 0xc8, 0xf0};

    void validate() const;
    nlohmann::json to_json() const;
};

enum class ColorCategory { None = 0, Scan = 1, Heat = 2 };

struct WordColor {
    ColorCategory category = ColorCategory::None;
    double heat = 0.0; ///< [0, 1], meaningful for Heat only

    friend bool operator==(const WordColor&, const WordColor&) = default;
};

WordColor color_for(double total_ms, const ColorScaleConfig& cfg = {});
/// Piecewise-linear interpolation over the stops; None renders as white.
Rgb to_rgb(WordColor color, const ColorScaleConfig& cfg = {});

struct AoiMetrics {
    std::vector<std::string> labels;
    double fixation_time_ms = 0.0;
    std::size_t words_fixated = 0;
    std::size_t chars_fixated = 0;
    std::size_t word_count_in_aoi = 0;
    double percent_words_fixated = 0.0;

    nlohmann::json to_json() const;
};

/// Metrics of the words selected by `labels` (empty = whole page).
AoiMetrics aoi_metrics(std::span<const WordEyeFixation> wef, const PageSnapshot& snap,
                       const std::set<std::string>& labels, AoiMode mode = AoiMode::Any);

struct RenderSegment {
    enum class Kind { Word, Ellipsis };
    Kind kind = Kind::Word;
    std::size_t word_id = 0;      ///< Word
    double total_ms = 0.0;        ///< Word
    WordColor color;              ///< Word
    std::size_t hidden_count = 0; ///< Ellipsis

    friend bool operator==(const RenderSegment&, const RenderSegment&) = default;
};

/// Reading-order segments with maximal runs of at least hide_threshold
/// unfixated words collapsed to one ellipsis. nullopt disables collapsing.
std::vector<RenderSegment> collapse_runs(const PageSnapshot& snap,
                                         std::span<const WordEyeFixation> wef,
                                         std::optional<std::size_t> hide_threshold,
                                         const ColorScaleConfig& cfg = {});

/// Task metadata for one (participant, stimulus): task type, topic,
/// difficulty, usefulness, bookmarked, free-form extras.
struct SessionAnnotation {
    std::map<std::string, std::string> values;
};

using AnnotationMap = std::map<SessionKey, SessionAnnotation>;

/// Array of {"participant", "stimulus", "values": {key: value}}. The same key
/// given twice for one session throws ValidationError.
AnnotationMap parse_annotations(const nlohmann::json& doc);
nlohmann::json annotations_to_json(const AnnotationMap& annotations);

/// Input for table rows: one (session, AOI selection) with its metrics.
struct SessionMetrics {
    SessionKey key;
    std::size_t chronological_index = 0;
    AoiMetrics metrics;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    nlohmann::json to_json() const;
};

/// One row per (participant, stimulus, AOI selection), ordered by participant
/// then chronological index. Annotation keys become columns (sorted); missing
/// values are empty.
Table table_rows(std::span<const SessionMetrics> sessions, const AnnotationMap& annotations);

struct SessionWords {
    SessionKey key;
    std::size_t chronological_index = 0;
    std::vector<WordEyeFixation> entries;
};

/// Per-word granularity of the data table.
Table word_table_rows(std::span<const SessionWords> sessions, const AnnotationMap& annotations);

/// Stable sort on one column; numeric comparison when both cells parse as numbers.
void sort_table(Table& table, const std::string& column, bool descending);

/// A parsed export row. Merged rows leave participant and first/last empty and
/// carry contributors plus the per-participant totals.
struct WefCsvRow {
    std::string participant;
    std::string stimulus;
    std::string word;
    std::size_t char_start = 0;
    double total_ms = 0.0;
    std::optional<double> first_seen_ms;
    std::optional<double> last_seen_ms;
    std::optional<std::size_t> contributors;
    std::vector<std::pair<std::string, double>> per_participant;
};

std::string export_wef_csv(std::span<const WordEyeFixation> entries);
std::string export_merged_csv(const std::string& stimulus_id,
                              std::span<const MergedWordFixation> entries);
/// Re-renders parsed rows; the column set follows whether any row is merged.
std::string export_rows_csv(std::span<const WefCsvRow> rows);
std::vector<WefCsvRow> parse_wef_csv(std::istream& in);

struct CharRange {
    std::size_t begin = 0; ///< inclusive
    std::size_t end = 0;   ///< exclusive
};

/// Sum of total_ms of rows whose char_start falls in each range, per
/// participant (statement x subject table).
std::map<std::string, std::vector<double>> sum_by_char_ranges(std::span<const WefCsvRow> rows,
                                                              std::span<const CharRange> ranges);

} // namespace wordgaze
