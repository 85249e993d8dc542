#pragma once

#include "wordgaze/fixation.hpp"
#include "wordgaze/gaze_ingest.hpp"
#include "wordgaze/geometry.hpp"
#include "wordgaze/snapshot.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wordgaze {

/// Aggregated dwell of one participant on one word of one stimulus.
struct WordEyeFixation {
    std::string participant_id;
    std::string stimulus_id;
    std::size_t word_id = 0;
    std::string word;
    std::size_t char_start = 0;
    double total_ms = 0.0;
    double first_seen_ms = 0.0;
    double last_seen_ms = 0.0;

    friend bool operator==(const WordEyeFixation&, const WordEyeFixation&) = default;
};

/// Uniform grid over word rectangles expanded by slop on every side.
/// Cells list word ids in ascending order, so the first containing box found
/// is the one with the smallest word id.
class SpatialIndex {
public:
    SpatialIndex() = default;
    SpatialIndex(std::span<const Rect> boxes, double slop_px);

    std::optional<std::size_t> hit_test(PagePoint p) const;

    double slop_px() const noexcept { return slop_; }
    std::size_t size() const noexcept { return boxes_.size(); }
    /// Boxes after slop expansion, indexed by word id.
    const std::vector<Rect>& boxes() const noexcept { return boxes_; }

private:
    std::vector<Rect> boxes_;
    double slop_ = 0.0;
    double origin_x_ = 0.0, origin_y_ = 0.0;
    double cell_w_ = 1.0, cell_h_ = 1.0;
    std::size_t cols_ = 0, rows_ = 0;
    std::vector<std::uint32_t> cell_start_; ///< CSR offsets, rows_*cols_ + 1
    std::vector<std::uint32_t> cell_items_;
};

/// Word rectangles of a snapshot, indexed by word id.
std::vector<Rect> word_rects(const PageSnapshot& snap);

SpatialIndex build_index(const PageSnapshot& snap, double slop_px = 0.0);
std::optional<std::size_t> hit_test(const SpatialIndex& index, PagePoint p);

enum class DwellMode { PerSample, Centroid };

const char* to_string(DwellMode mode);
DwellMode dwell_mode_from_string(std::string_view name);

/// Credits fixation dwell to words. In PerSample mode each fixation sample
/// gets (t_next - t) inside its fixation, the last one the nominal period,
/// and the dwell goes to the word under that sample. Centroid mode credits
/// the whole dwell span to the word under the fixation centroid.
/// Output is sorted by word id.
std::vector<WordEyeFixation> accumulate(const SessionKey& key, std::span<const TimedPoint> samples,
                                        const IdtResult& idt, const SpatialIndex& index,
                                        const PageSnapshot& snap, const RecordingMeta& meta,
                                        DwellMode mode = DwellMode::PerSample);

/// Per-session word-eye-fixation store file.
struct WefStore {
    SessionKey key;
    std::string layout_hash;
    nlohmann::json params;
    std::vector<WordEyeFixation> entries;
};

nlohmann::json wef_store_to_json(const WefStore& store);
WefStore wef_store_from_json(const nlohmann::json& doc);

} // namespace wordgaze
