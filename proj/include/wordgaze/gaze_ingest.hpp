#pragma once

#include "wordgaze/geometry.hpp"

#include <json.hpp>

#include <compare>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wordgaze {

enum class FrameKind { MonitorAbsolute, ViewportRelative, PageRelative };

const char* to_string(FrameKind kind);
FrameKind frame_kind_from_string(const std::string& name);

/// Coordinate system a tracker export was recorded in. The chrome offsets
/// (browser header/toolbar) only apply to monitor-absolute recordings.
struct CoordinateFrame {
    FrameKind kind = FrameKind::PageRelative;
    double chrome_offset_x = 0.0;
    double chrome_offset_y = 0.0;
};

struct RecordingMeta {
    double sample_rate_hz = 250.0;
    std::optional<double> screen_px_per_degree;

    double period_ms() const { return 1000.0 / sample_rate_hz; }
};

/// Pixels per degree of visual angle for a viewing distance and screen density.
/// 1 deg at 65 cm is ~11 mm on screen; at 96 ppi that is ~42 px.
double px_per_degree(double viewing_distance_mm, double pixels_per_inch);

struct GazeSample {
    std::string participant_id;
    std::string stimulus_id;
    double t_ms = 0.0;
    double x = 0.0;
    double y = 0.0;
    double scroll_x = 0.0;
    double scroll_y = 0.0;
    bool valid = true;
};

/// Header names of the gaze CSV columns. scroll_x, scroll_y and valid are
/// optional in the file; the rest are required.
struct ColumnMap {
    std::string participant = "participant";
    std::string stimulus = "stimulus";
    std::string time = "time_ms";
    std::string x = "x";
    std::string y = "y";
    std::string scroll_x = "scroll_x";
    std::string scroll_y = "scroll_y";
    std::string valid = "valid";
};

/// Sidecar configuration for one gaze export.
struct IngestConfig {
    char delimiter = ',';
    ColumnMap columns;
    CoordinateFrame frame;
    RecordingMeta meta;
    std::vector<std::string> dropout_markers{"", "--"};
    double out_of_page_slack_px = 5.0;
    double revisit_threshold_ms = 30000.0;

    void validate() const;
    static IngestConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

IngestConfig load_ingest_config(const std::string& path);

struct RowError {
    std::size_t line = 0;
    std::string column;
    std::string message;
};

struct ParseReport {
    std::size_t rows = 0;            ///< data rows seen (header excluded)
    std::size_t samples = 0;         ///< samples yielded
    std::size_t invalid_samples = 0; ///< yielded with valid=false
    std::size_t skipped_rows = 0;
    std::vector<RowError> errors;    ///< first max_stored_errors skipped rows

    static constexpr std::size_t max_stored_errors = 1000;
};

/// Streaming reader: one row in memory at a time.
class GazeCsvReader {
public:
    /// Reads the header. Throws ConfigError naming any required column that
    /// the header lacks.
    GazeCsvReader(std::istream& in, IngestConfig config);

    /// Next well-formed sample; malformed rows are skipped and reported.
    bool next(GazeSample& out);

    const ParseReport& report() const noexcept { return report_; }
    bool has_scroll_columns() const noexcept { return col_scroll_x_ >= 0 && col_scroll_y_ >= 0; }

private:
    bool is_dropout(const std::string& cell) const;
    void reject(std::size_t column, std::string message);

    std::istream& in_;
    IngestConfig config_;
    ParseReport report_;
    std::vector<std::string> header_;
    std::vector<std::string> fields_;
    std::string scratch_;
    std::size_t line_ = 1;
    int col_participant_ = -1, col_stimulus_ = -1, col_time_ = -1, col_x_ = -1, col_y_ = -1;
    int col_scroll_x_ = -1, col_scroll_y_ = -1, col_valid_ = -1;
};

std::vector<GazeSample> parse_gaze_csv(std::istream& in, const IngestConfig& config,
                                       ParseReport* report = nullptr);

struct PageMapping {
    PagePoint point;
    bool out_of_page = false;
};

/// Maps a valid sample into page space. Throws ContractViolation for an invalid
/// sample. Points further than slack_px into negative coordinates are flagged.
PageMapping normalize_to_page(const GazeSample& s, const CoordinateFrame& frame,
                              double slack_px = 5.0);

struct SessionKey {
    std::string participant_id;
    std::string stimulus_id;

    friend auto operator<=>(const SessionKey&, const SessionKey&) = default;
    friend bool operator==(const SessionKey&, const SessionKey&) = default;
};

/// Sample stored inside a session; ids live on the session.
struct SessionSample {
    double t_ms = 0.0;
    double x = 0.0;
    double y = 0.0;
    double scroll_x = 0.0;
    double scroll_y = 0.0;
    bool valid = true;
};

/// Half-open range [begin, end) of session samples with no gap above the
/// revisit threshold.
struct VisitSegment {
    std::size_t begin = 0;
    std::size_t end = 0;
    double start_ms = 0.0;
    double end_ms = 0.0;
};

/// Same mapping for a session-stored sample.
PageMapping normalize_to_page(const SessionSample& s, const CoordinateFrame& frame, double slack_px = 5.0);

struct Session {
    SessionKey key;
    std::vector<SessionSample> samples; ///< sorted by t, stable
    double first_ms = 0.0;
    double last_ms = 0.0;
    std::vector<VisitSegment> visits;
    CoordinateFrame frame;
    RecordingMeta meta;
    double out_of_page_slack_px = 5.0;
    double revisit_threshold_ms = 30000.0;
};

using SessionMap = std::map<SessionKey, Session>;

/// Incremental sessionizer used by both the in-memory and the streaming paths.
class SessionBuilder {
public:
    /// Settings of `config` are attached to every session this sample opens.
    /// Mixing configs within one session throws ConfigError.
    void add(const GazeSample& s, const IngestConfig& config);
    SessionMap finish() &&;
    std::size_t sample_count() const noexcept { return count_; }

private:
    SessionMap sessions_;
    std::map<SessionKey, std::size_t> config_of_;
    std::vector<IngestConfig> configs_;
    std::size_t count_ = 0;
};

/// Groups samples per (participant, stimulus), sorts each group by time
/// (stable) and splits it into visit segments.
SessionMap sessionize(std::span<const GazeSample> samples, const IngestConfig& config = {});

/// Sorts samples and recomputes first/last/visits. Exposed for SessionBuilder
/// and tests.
void finalize_session(Session& session);

/// Per participant, session keys ordered by first timestamp (ties by stimulus id).
std::map<std::string, std::vector<SessionKey>> chronological_order(const SessionMap& sessions);

struct ScrollEvent {
    double t_ms = 0.0;
    double scroll_x = 0.0;
    double scroll_y = 0.0;
};

/// Scroll-event log: participant, stimulus, time_ms, scroll_x, scroll_y.
std::map<SessionKey, std::vector<ScrollEvent>> parse_scroll_log(std::istream& in,
                                                                char delimiter = ',');

/// Joins a scroll log onto a session as a step function of time: each sample
/// takes the offsets of the latest event at or before it (0 before the first).
void apply_scroll_log(Session& session, std::span<const ScrollEvent> events);

} // namespace wordgaze
