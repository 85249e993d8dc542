#pragma once

#include "wordgaze/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace wordgaze {

/// Dispersion-threshold parameters. 42 px is one degree of visual angle
/// (11 mm at 65 cm) at 96 ppi.
struct IdtParams {
    double dispersion_threshold_px = 42.0;
    double min_duration_ms = 80.0;

    void validate() const;
    friend bool operator==(const IdtParams&, const IdtParams&) = default;
};

/// A detected fixation. Members are the session samples [begin, end);
/// end_ms is the timestamp of the last member.
struct Fixation {
    double start_ms = 0.0;
    double end_ms = 0.0;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const Fixation&, const Fixation&) = default;
};

/// Time the fixation accounts for when its last sample is credited one
/// nominal sample period: end - start + period.
inline double dwell_span_ms(const Fixation& f, double period_ms) {
    return f.end_ms - f.start_ms + period_ms;
}

/// Per-sample label: index of the owning fixation, or saccade.
struct SampleLabel {
    static constexpr std::int32_t saccade = -1;
    std::int32_t fixation = saccade;

    bool is_saccade() const noexcept { return fixation == saccade; }
    friend bool operator==(const SampleLabel&, const SampleLabel&) = default;
};

struct IdtResult {
    std::vector<Fixation> fixations;
    std::vector<SampleLabel> labels;
};

/// (max x - min x) + (max y - min y). Throws ContractViolation when empty.
double dispersion(std::span<const PagePoint> points);

/// I-DT over one contiguous run of time-ordered samples.
IdtResult detect_fixations_idt(std::span<const TimedPoint> run, const IdtParams& params);

/// I-DT over a whole session. Samples with usable[i] == 0 (dropout,
/// out-of-page) are labeled saccade and split the stream into runs, as does
/// any inter-sample gap larger than max_gap_ms.
IdtResult detect_session_fixations(std::span<const TimedPoint> samples,
                                   std::span<const std::uint8_t> usable,
                                   const IdtParams& params, double max_gap_ms);

} // namespace wordgaze
