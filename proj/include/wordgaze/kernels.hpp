#pragma once

// Data-parallel kernels (OpenMP) with serial reference versions. The serial
// versions are kept for equivalence tests and the benchmark.

#include "wordgaze/fixation.hpp"
#include "wordgaze/gaze_ingest.hpp"
#include "wordgaze/merge.hpp"
#include "wordgaze/snapshot.hpp"
#include "wordgaze/word_mapping.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace wordgaze {

inline constexpr std::int64_t no_word = -1;

/// Grid-index hit test for many points.
std::vector<std::int64_t> hit_test_batch(const SpatialIndex& index, std::span<const PagePoint> points);

/// Linear scan over closed boxes; smallest word id wins.
std::vector<std::int64_t> hit_test_batch_reference(std::span<const Rect> boxes,
                                                   std::span<const PagePoint> points);

/// Everything that shapes derived output; recorded with every derived file.
struct ProcessParams {
    IdtParams idt;
    double slop_px = 0.0;
    DwellMode dwell_mode = DwellMode::PerSample;
    std::size_t merge_radius = default_merge_radius;

    void validate() const;
    nlohmann::json to_json() const;
    static ProcessParams from_json(const nlohmann::json& j);
    friend bool operator==(const ProcessParams&, const ProcessParams&) = default;
};

struct SessionReport {
    std::size_t samples = 0;
    std::size_t valid_samples = 0;
    std::size_t out_of_page = 0;
    std::size_t fixations = 0;
    std::size_t fixation_samples = 0;
    double fixation_dwell_ms = 0.0; ///< sum of dwell spans
    double word_dwell_ms = 0.0;     ///< sum of per-word totals
};

struct SessionJob {
    const Session* session = nullptr;
    const PageSnapshot* snapshot = nullptr; ///< null: session left unprocessed
    const SpatialIndex* index = nullptr;    ///< built from snapshot with params.slop_px
};

struct SessionResult {
    SessionKey key;
    bool processed = false;
    IdtResult idt;
    std::vector<WordEyeFixation> words;
    SessionReport report;
};

/// Normalizes, detects fixations and accumulates word dwell for one session.
SessionResult process_session(const SessionJob& job, const ProcessParams& params);

/// One result per job, same order. Sessions are spread over OpenMP threads.
std::vector<SessionResult> process_sessions(std::span<const SessionJob> jobs, const ProcessParams& params);
std::vector<SessionResult> process_sessions_reference(std::span<const SessionJob> jobs,
                                                      const ProcessParams& params);

} // namespace wordgaze
