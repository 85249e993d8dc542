#pragma once

#include "wordgaze/analytics.hpp"
#include "wordgaze/gaze_ingest.hpp"
#include "wordgaze/snapshot.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wordgaze {

struct SeriesStats {
    std::size_t n = 0;
    double max = 0.0;
    double mean = 0.0;
    double sd = 0.0;         ///< sample standard deviation (n - 1)
    bool degenerate = false; ///< n == 1, sd reported as 0
};

/// Sample Pearson coefficient, clamped to [-1, 1]. Throws ContractViolation on
/// length mismatch or n < 2, and Error when either series is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Throws ContractViolation when empty.
SeriesStats summary_stats(std::span<const double> xs);

/// One row of a reference export: seconds of AOI dwell for a stimulus
/// (optionally for one participant).
struct ReferencePoint {
    std::optional<std::string> participant;
    std::string stimulus_id;
    double seconds = 0.0;
};

/// Columns stimulus_id, seconds, and optionally participant.
std::vector<ReferencePoint> parse_reference_csv(std::istream& in);

/// Join key used by compare_aoi_series: "participant/stimulus" when the
/// reference names participants, else the stimulus id.
std::string reference_key(const ReferencePoint& p);

struct ComparisonReport {
    SeriesStats stats_reference;
    SeriesStats stats_engine;
    double pearson_r = 0.0;
    std::size_t n_pairs = 0;
    std::vector<std::string> keys; ///< joined keys, sorted
    std::vector<double> reference_seconds;
    std::vector<double> engine_seconds;
    std::vector<std::string> unmatched_reference;
    std::vector<std::string> unmatched_engine;

    nlohmann::json to_json() const;
};

/// Joins the reference series with engine AOI metrics (keyed like
/// reference_key) and compares them in seconds. Throws Error when fewer than
/// two keys match.
ComparisonReport compare_aoi_series(std::span<const ReferencePoint> reference,
                                    const std::map<std::string, AoiMetrics>& engine);

/// Tool x {max, mean, sd} x r text table.
std::string format_comparison_table(const ComparisonReport& report, const std::string& aoi_name,
                                    const std::string& reference_tool = "Reference",
                                    const std::string& engine_tool = "Engine");

struct PlannedDwell {
    std::size_t word_id = 0;
    double dwell_ms = 0.0;
};

struct TraceOptions {
    std::string participant_id = "p01";
    std::string stimulus_id;     ///< defaults to the snapshot's id
    double start_ms = 0.0;
    double jitter_px = 0.0;      ///< sd of Gaussian jitter
    std::uint64_t seed = 1;
};

/// Synthetic reading trace (page-relative samples). Each planned word gets
/// round(dwell / period) samples at its box center plus truncated jitter;
/// consecutive words are separated by two saccade samples in the right page
/// margin, clear of every word box.
std::vector<GazeSample> generate_reading_trace(const PageSnapshot& snap,
                                               std::span<const PlannedDwell> plan,
                                               const RecordingMeta& meta,
                                               const TraceOptions& options = {});

/// Splits a region dwell over its leading words on the sample grid: the
/// region gets round(total / period) samples, spread evenly over as many
/// words as can each receive at least min_word_ms.
std::vector<PlannedDwell> plan_region_dwell(std::span<const std::size_t> word_ids, double total_ms,
                                            double period_ms, double min_word_ms = 100.0);

struct TextBlock {
    std::string text;
    std::vector<std::string> labels;
    std::string dom_path = "html>body>div>p";
};

struct PageLayout {
    double width_px = 1280.0;
    double margin_px = 40.0;
    double char_width_px = 9.0;
    double line_height_px = 24.0;
    double word_height_px = 18.0;
    double block_gap_px = 16.0;
};

/// Lays blocks out with a fixed-pitch font and greedy line breaking. Used for
/// synthetic fixtures.
PageSnapshot synthesize_page(const std::string& stimulus_id, std::span<const TextBlock> blocks,
                             const PageLayout& layout = {});

struct StudySpec {
    std::size_t participants = 2;
    std::size_t stimuli = 4;
    std::size_t stimuli_per_participant = 2;
    std::size_t samples_per_session = 2000;
    std::size_t words_per_page = 120;
    double sample_rate_hz = 250.0;
    std::uint64_t seed = 7;
};

struct StudyFiles {
    std::filesystem::path gaze_csv;
    std::filesystem::path snapshot_dir;
    std::filesystem::path config;
    std::filesystem::path annotations;
    std::size_t samples = 0;
    std::size_t sessions = 0;
};

/// Writes a synthetic study (gaze CSV, snapshot files, sidecar config,
/// annotations) under dir. Samples are streamed to disk.
StudyFiles write_synthetic_study(const std::filesystem::path& dir, const StudySpec& spec);

} // namespace wordgaze
