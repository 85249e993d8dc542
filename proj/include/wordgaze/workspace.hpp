#pragma once

#include "wordgaze/analytics.hpp"
#include "wordgaze/gaze_ingest.hpp"
#include "wordgaze/kernels.hpp"
#include "wordgaze/merge.hpp"
#include "wordgaze/snapshot.hpp"
#include "wordgaze/word_mapping.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace wordgaze {

inline constexpr int workspace_version = 1;

struct ImportRequest {
    std::vector<std::filesystem::path> gaze_files;
    std::vector<std::filesystem::path> snapshot_files; ///< files or directories of *.json
    std::optional<std::filesystem::path> annotations;
    std::optional<std::filesystem::path> config;     ///< ingest sidecar for these gaze files
    std::optional<std::filesystem::path> scroll_log; ///< used when gaze files lack scroll columns
    std::optional<std::filesystem::path> variants;   ///< [{participant, stimulus, layout_hash}]
};

struct ImportSummary {
    bool changed = false;
    std::size_t new_inputs = 0;
    std::size_t new_snapshots = 0;
    std::size_t sessions = 0;
    std::size_t processed_sessions = 0;
    std::size_t samples = 0;
    std::size_t skipped_rows = 0;
    std::vector<std::string> warnings;
};

/// Directory-tree store with a manifest. Writers hold an exclusive lock on
/// <root>/.lock; the manifest rename is the commit point of every write.
class Workspace {
public:
    /// Opens (creating if needed) the workspace at root.
    explicit Workspace(std::filesystem::path root);

    ImportSummary import(const ImportRequest& request);

    /// Recomputes every derived file with new parameters.
    ImportSummary process(const ProcessParams& params);

    const std::filesystem::path& root() const noexcept { return root_; }
    nlohmann::json manifest() const;
    ProcessParams params() const;

private:
    ImportSummary rebuild(nlohmann::json manifest, const ProcessParams& params, ImportSummary summary);

    std::filesystem::path root_;
};

/// Selection of data to show. Sets are ignored when the matching all-flag is set.
struct QueryFilter {
    bool all_participants = true;
    std::set<std::string> participants;
    bool all_stimuli = true;
    std::set<std::string> stimuli;
    std::set<std::string> aoi_labels; ///< empty: no AOI restriction
    AoiMode aoi_mode = AoiMode::Any;
    bool merged = false;
};

enum class TableGranularity { Stimulus, Word };

struct ViewOptions {
    ColorScaleConfig colors;
    std::optional<std::size_t> hide_threshold;
    TableGranularity granularity = TableGranularity::Stimulus;
};

struct SessionRecord {
    SessionKey key;
    std::size_t chronological_index = 0;
    bool processed = false;
    std::string layout_hash;
    std::string derived_file;
    SessionReport report;
    double first_ms = 0.0;
    double last_ms = 0.0;
    std::size_t visits = 0;
};

struct StimulusInfo {
    std::string stimulus_id;
    std::size_t visitors = 0;
    std::vector<std::string> layout_hashes;
};

/// Read-only, fully loaded view of a processed workspace. Safe to share
/// between threads.
class WorkspaceView {
public:
    static WorkspaceView load(const std::filesystem::path& root);

    const std::vector<std::string>& participants() const noexcept { return participants_; }
    const std::vector<StimulusInfo>& stimuli() const noexcept { return stimuli_; }
    const std::vector<SessionRecord>& sessions() const noexcept { return sessions_; }
    const AnnotationMap& annotations() const noexcept { return annotations_; }
    const ProcessParams& params() const noexcept { return params_; }

    const SessionRecord* find_session(const SessionKey& key) const;
    const PageSnapshot* snapshot(const std::string& layout_hash) const;
    const std::vector<WordEyeFixation>& words(const SessionKey& key) const;
    const StimulusInfo* find_stimulus(const std::string& id) const;

private:
    std::vector<std::string> participants_;
    std::vector<StimulusInfo> stimuli_;
    std::vector<SessionRecord> sessions_; ///< by participant, then chronological index
    std::map<SessionKey, std::size_t> session_pos_;
    std::map<std::string, std::shared_ptr<const PageSnapshot>> snapshots_;
    std::map<SessionKey, std::vector<WordEyeFixation>> words_;
    AnnotationMap annotations_;
    ProcessParams params_;
};

struct SessionPayload {
    const SessionRecord* record = nullptr;
    AoiMetrics metrics;
    std::vector<WordEyeFixation> words; ///< restricted to the AOI
    std::vector<RenderSegment> segments;
    std::vector<std::string> warnings;
};

struct MergedPayload {
    std::string stimulus_id;
    std::string base_layout;
    std::size_t visitors = 0;
    std::size_t contributors = 0;
    MergeResult result;
    AoiMetrics metrics;
    std::vector<RenderSegment> segments;
};

struct Dataset {
    std::vector<SessionPayload> sessions;
    std::vector<MergedPayload> merged;
    Table table;
    std::vector<std::string> not_found;
    std::vector<StimulusInfo> stimuli;

    nlohmann::json to_json(const WorkspaceView& view) const;
};

/// Unknown participant or stimulus ids are listed in not_found; the rest of
/// the query is still served.
Dataset query(const WorkspaceView& view, const QueryFilter& filter, const ViewOptions& options = {});

/// Export CSV of a query: per-session entries, or merged entries when
/// filter.merged is set.
std::string export_query_csv(const WorkspaceView& view, const QueryFilter& filter);

/// Engine AOI series keyed per stimulus (summed over selected participants) or
/// per "participant/stimulus" when by_participant is set.
std::map<std::string, AoiMetrics> engine_aoi_series(const WorkspaceView& view, const QueryFilter& filter,
                                                    bool by_participant);

} // namespace wordgaze
