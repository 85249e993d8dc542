#include "wordgaze/fixation.hpp"
#include "wordgaze/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wordgaze {

void IdtParams::validate() const
{
    if (!(dispersion_threshold_px > 0.0) || !std::isfinite(dispersion_threshold_px))
        throw ContractViolation("I-DT dispersion threshold must be > 0");
    if (!(min_duration_ms > 0.0) || !std::isfinite(min_duration_ms))
        throw ContractViolation("I-DT minimum duration must be > 0");
}

double dispersion(std::span<const PagePoint> points)
{
    if (points.empty())
        throw ContractViolation("dispersion of an empty point set");
    double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
    for (const auto& p : points.subspan(1)) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    return (max_x - min_x) + (max_y - min_y);
}

namespace {

struct Extent {
    double min_x = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();

    void add(const TimedPoint& p)
    {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    double spread() const { return (max_x - min_x) + (max_y - min_y); }
};

} // namespace

IdtResult detect_fixations_idt(std::span<const TimedPoint> run, const IdtParams& params)
{
    params.validate();
    IdtResult out;
    const std::size_t n = run.size();
    out.labels.assign(n, SampleLabel{});

    std::size_t i = 0;
    std::size_t j = 0; // last index of the current window (inclusive)
    while (i < n) {
        j = std::max(j, i);
        while (j < n && run[j].t_ms - run[i].t_ms < params.min_duration_ms)
            ++j;
        if (j == n)
            break; // not enough time left for a window

        Extent ext;
        for (std::size_t k = i; k <= j; ++k)
            ext.add(run[k]);

        if (ext.spread() > params.dispersion_threshold_px) {
            ++i;
            continue;
        }
        while (j + 1 < n) {
            Extent grown = ext;
            grown.add(run[j + 1]);
            if (grown.spread() > params.dispersion_threshold_px)
                break;
            ext = grown;
            ++j;
        }

        Fixation f;
        f.begin = i;
        f.end = j + 1;
        f.start_ms = run[i].t_ms;
        f.end_ms = run[j].t_ms;
        double sx = 0.0, sy = 0.0;
        for (std::size_t k = i; k <= j; ++k) {
            sx += run[k].x;
            sy += run[k].y;
        }
        f.centroid_x = sx / static_cast<double>(f.size());
        f.centroid_y = sy / static_cast<double>(f.size());
        const auto id = static_cast<std::int32_t>(out.fixations.size());
        for (std::size_t k = i; k <= j; ++k)
            out.labels[k].fixation = id;
        out.fixations.push_back(f);
        i = j + 1;
    }
    return out;
}

IdtResult detect_session_fixations(std::span<const TimedPoint> samples, std::span<const std::uint8_t> usable,
                                   const IdtParams& params, double max_gap_ms)
{
    if (usable.size() != samples.size())
        throw ContractViolation("detect_session_fixations: mask length differs from sample count");
    params.validate();
    IdtResult out;
    out.labels.assign(samples.size(), SampleLabel{});

    std::size_t i = 0;
    const std::size_t n = samples.size();
    while (i < n) {
        if (!usable[i]) {
            ++i;
            continue;
        }
        std::size_t end = i + 1;
        while (end < n && usable[end] && samples[end].t_ms - samples[end - 1].t_ms <= max_gap_ms)
            ++end;
        IdtResult run = detect_fixations_idt(samples.subspan(i, end - i), params);
        const auto base_id = static_cast<std::int32_t>(out.fixations.size());
        for (auto f : run.fixations) {
            f.begin += i;
            f.end += i;
            out.fixations.push_back(f);
        }
        for (std::size_t k = 0; k < run.labels.size(); ++k)
            if (!run.labels[k].is_saccade())
                out.labels[i + k].fixation = base_id + run.labels[k].fixation;
        i = end;
    }
    return out;
}

} // namespace wordgaze
