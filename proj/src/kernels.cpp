#include "wordgaze/kernels.hpp"
#include "wordgaze/error.hpp"

#include <omp.h>

#include <exception>
#include <mutex>

namespace wordgaze {

std::vector<std::int64_t> hit_test_batch(const SpatialIndex& index, std::span<const PagePoint> points)
{
    std::vector<std::int64_t> out(points.size(), no_word);
    const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (auto hit = index.hit_test(points[i]))
            out[i] = static_cast<std::int64_t>(*hit);
    }
    return out;
}

std::vector<std::int64_t> hit_test_batch_reference(std::span<const Rect> boxes, std::span<const PagePoint> points)
{
    std::vector<std::int64_t> out(points.size(), no_word);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t b = 0; b < boxes.size(); ++b) {
            if (boxes[b].contains(points[i])) {
                out[i] = static_cast<std::int64_t>(b);
                break;
            }
        }
    }
    return out;
}

void ProcessParams::validate() const
{
    idt.validate();
    if (!(slop_px >= 0.0))
        throw ContractViolation("slop must be >= 0");
}

nlohmann::json ProcessParams::to_json() const
{
    return {{"idt_dispersion_px", idt.dispersion_threshold_px},
            {"idt_min_duration_ms", idt.min_duration_ms},
            {"slop_px", slop_px},
            {"dwell_rule", to_string(dwell_mode)},
            {"merge_radius", merge_radius}};
}

ProcessParams ProcessParams::from_json(const nlohmann::json& j)
{
    ProcessParams p;
    try {
        p.idt.dispersion_threshold_px = j.value("idt_dispersion_px", p.idt.dispersion_threshold_px);
        p.idt.min_duration_ms = j.value("idt_min_duration_ms", p.idt.min_duration_ms);
        p.slop_px = j.value("slop_px", p.slop_px);
        p.dwell_mode = dwell_mode_from_string(j.value("dwell_rule", std::string(to_string(p.dwell_mode))));
        p.merge_radius = j.value("merge_radius", p.merge_radius);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("processing parameters: ") + e.what());
    }
    p.validate();
    return p;
}

SessionResult process_session(const SessionJob& job, const ProcessParams& params)
{
    if (!job.session)
        throw ContractViolation("process_session: no session");
    const Session& session = *job.session;
    SessionResult r;
    r.key = session.key;
    r.report.samples = session.samples.size();

    std::vector<TimedPoint> points(session.samples.size());
    std::vector<std::uint8_t> usable(session.samples.size(), 0);
    for (std::size_t i = 0; i < session.samples.size(); ++i) {
        const SessionSample& s = session.samples[i];
        points[i].t_ms = s.t_ms;
        if (!s.valid)
            continue;
        ++r.report.valid_samples;
        const PageMapping m = normalize_to_page(s, session.frame, session.out_of_page_slack_px);
        points[i].x = m.point.x;
        points[i].y = m.point.y;
        if (m.out_of_page) {
            ++r.report.out_of_page;
            continue;
        }
        usable[i] = 1;
    }

    r.idt = detect_session_fixations(points, usable, params.idt, session.revisit_threshold_ms);
    const double period = session.meta.period_ms();
    r.report.fixations = r.idt.fixations.size();
    for (const auto& f : r.idt.fixations) {
        r.report.fixation_samples += f.size();
        r.report.fixation_dwell_ms += dwell_span_ms(f, period);
    }

    if (!job.snapshot)
        return r;
    SpatialIndex local;
    const SpatialIndex* index = job.index;
    if (!index) {
        local = build_index(*job.snapshot, params.slop_px);
        index = &local;
    }
    r.words = accumulate(session.key, points, r.idt, *index, *job.snapshot, session.meta, params.dwell_mode);
    for (const auto& w : r.words)
        r.report.word_dwell_ms += w.total_ms;
    r.processed = true;
    return r;
}

std::vector<SessionResult> process_sessions(std::span<const SessionJob> jobs, const ProcessParams& params)
{
    params.validate();
    std::vector<SessionResult> out(jobs.size());
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[i] = process_session(jobs[i], params);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure)
                failure = std::current_exception();
        }
    }
    if (failure)
        std::rethrow_exception(failure);
    return out;
}

std::vector<SessionResult> process_sessions_reference(std::span<const SessionJob> jobs, const ProcessParams& params)
{
    params.validate();
    std::vector<SessionResult> out;
    out.reserve(jobs.size());
    for (const auto& job : jobs)
        out.push_back(process_session(job, params));
    return out;
}

} // namespace wordgaze
