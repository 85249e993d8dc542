#pragma once

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace wordgaze {

inline constexpr int snapshot_schema_version = 1;

/// One rendered word. Character offsets count Unicode code points of the
/// page text; geometry is in CSS pixels of the page.
struct WordBox {
    std::size_t word_id = 0;
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
    std::string dom_path;
    std::vector<std::string> labels; ///< sorted, unique

    friend bool operator==(const WordBox&, const WordBox&) = default;
};

struct PageSnapshot {
    std::string stimulus_id;
    std::string url;
    std::string page_text;
    double viewport_width_px = 0.0;
    std::vector<WordBox> words;
    std::string layout_hash;

    friend bool operator==(const PageSnapshot&, const PageSnapshot&) = default;
};

/// Checks every snapshot invariant; returns one diagnostic per violation.
std::vector<std::string> check_snapshot(const PageSnapshot& snap);

/// SHA-256 over the page text and every word's text, offsets and geometry.
std::string compute_layout_hash(const PageSnapshot& snap);

/// Parses and validates. Throws ValidationError (diagnostics list) on any
/// invariant violation or schema mismatch. A missing layout_hash is filled in;
/// a present one must match.
PageSnapshot load_snapshot(const nlohmann::json& doc);
PageSnapshot load_snapshot_file(const std::filesystem::path& path);

nlohmann::json snapshot_to_json(const PageSnapshot& snap);
/// Canonical serialized form (stable bytes for a given snapshot).
std::string serialize_snapshot(const PageSnapshot& snap);

struct LabelCount {
    std::string label;
    std::size_t words = 0;

    friend bool operator==(const LabelCount&, const LabelCount&) = default;
};

/// Every label on any word with the number of words carrying it, sorted by label.
std::vector<LabelCount> css_vocabulary(const PageSnapshot& snap);

enum class AoiMode { Any, All };

const char* to_string(AoiMode mode);
AoiMode aoi_mode_from_string(std::string_view name);

/// Word ids (reading order) selected by a label filter. An empty filter
/// selects every word. Labels absent from the page are reported in *warnings.
std::vector<std::size_t> words_in_aoi(const PageSnapshot& snap, const std::set<std::string>& wanted,
                                      AoiMode mode, std::vector<std::string>* warnings = nullptr);

/// Code points [max(0, pos - radius), min(len, pos + radius)) of the page text.
std::string text_context(const PageSnapshot& snap, std::size_t char_pos, std::size_t radius);

namespace utf8 {
/// Byte offset of every code point plus a final entry equal to text.size().
std::vector<std::size_t> code_point_offsets(std::string_view text);
std::size_t length(std::string_view text);
} // namespace utf8

} // namespace wordgaze
