#pragma once

#include "wordgaze/snapshot.hpp"
#include "wordgaze/word_mapping.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace wordgaze {

inline constexpr std::size_t default_merge_radius = 50;

struct ParticipantDwell {
    double total_ms = 0.0;
    double first_seen_ms = 0.0;
    double last_seen_ms = 0.0;

    friend bool operator==(const ParticipantDwell&, const ParticipantDwell&) = default;
};

struct MergedWordFixation {
    std::size_t word_id = 0; ///< in the base snapshot
    std::string word;
    std::size_t char_start = 0;
    double total_ms = 0.0;
    std::map<std::string, ParticipantDwell> per_participant;
    std::size_t contributors = 0;

    friend bool operator==(const MergedWordFixation&, const MergedWordFixation&) = default;
};

struct MergeInput {
    std::string participant_id;
    std::vector<WordEyeFixation> entries;
    std::string layout_hash; ///< snapshot the entries were computed on
};

struct UnmatchedEntry {
    std::string participant_id;
    WordEyeFixation entry;

    friend bool operator==(const UnmatchedEntry&, const UnmatchedEntry&) = default;
};

struct MergeResult {
    std::vector<MergedWordFixation> merged; ///< sorted by word id
    std::vector<UnmatchedEntry> unmatched;  ///< sorted by participant, char_start
};

/// Finds the base word for an entry: same text at the same offset, else the
/// same text whose start is within radius code points (closest, ties to the
/// smaller offset).
std::optional<std::size_t> align_word(const WordEyeFixation& w, const PageSnapshot& base,
                                      std::size_t radius = default_merge_radius);

/// Merges per-participant sets onto a base snapshot. Throws ContractViolation
/// when base is null or an entry belongs to another stimulus.
MergeResult merge_sets(std::span<const MergeInput> sets, const PageSnapshot* base,
                       std::size_t radius = default_merge_radius);

/// Layout variant seen by the most participants; ties go to the variant that
/// appears first in `seen` (which callers pass in chronological order).
/// `seen` holds (layout_hash, participant_id) pairs.
std::string choose_base_layout(std::span<const std::pair<std::string, std::string>> seen);

/// Total dwell of a merged set plus its unmatched entries.
double merged_total_ms(const MergeResult& result);

} // namespace wordgaze
