#pragma once

#include "support.hpp"
#include "wordgaze/validation.hpp"
#include "wordgaze/workspace.hpp"

#include <random>

namespace testsupport {

/// Noise-free reading plan: every `stride`-th word for `dwell_ms`.
inline std::vector<wordgaze::PlannedDwell> stride_plan(const wordgaze::PageSnapshot& snap, std::size_t stride,
                                                       double dwell_ms, std::size_t offset = 0)
{
    std::vector<wordgaze::PlannedDwell> plan;
    for (std::size_t i = offset; i < snap.words.size(); i += stride)
        plan.push_back({i, dwell_ms});
    return plan;
}

inline void append_trace(std::vector<wordgaze::GazeSample>& out, const wordgaze::PageSnapshot& snap,
                         const std::vector<wordgaze::PlannedDwell>& plan, const std::string& participant,
                         double start_ms)
{
    wordgaze::TraceOptions opt;
    opt.participant_id = participant;
    opt.start_ms = start_ms;
    const auto t = wordgaze::generate_reading_trace(snap, plan, wordgaze::RecordingMeta{250}, opt);
    out.insert(out.end(), t.begin(), t.end());
}

/// Two participants over the hello and record pages.
struct SmallStudy {
    std::filesystem::path gaze, config, annotations, snapshots;

    explicit SmallStudy(const std::filesystem::path& dir)
    {
        const auto hello = load_fixture("hello_world.json");
        const auto record = load_fixture("record_page.json");
        std::vector<wordgaze::GazeSample> samples;
        append_trace(samples, hello, {{0, 200}, {1, 160}}, "p01", 0);
        append_trace(samples, record, stride_plan(record, 2, 200), "p01", 10000);
        append_trace(samples, record, stride_plan(record, 3, 240, 1), "p02", 0);
        gaze = dir / "gaze.csv";
        write_gaze_csv(gaze, samples);
        config = dir / "config.json";
        write_text(config, page_config_json());
        annotations = dir / "annotations.json";
        write_text(annotations, R"([{"participant":"p01","stimulus":"record0042","values":{"task_type":"B","usefulness":1}}])");
        snapshots = dir / "snapshots";
        std::filesystem::create_directories(snapshots);
        std::filesystem::copy_file(fixture("hello_world.json"), snapshots / "hello.json");
        std::filesystem::copy_file(fixture("record_page.json"), snapshots / "record.json");
    }

    wordgaze::ImportRequest request() const
    {
        wordgaze::ImportRequest r;
        r.gaze_files = {gaze};
        r.snapshot_files = {snapshots};
        r.config = config;
        r.annotations = annotations;
        return r;
    }
};

/// Nine participants; six read the news page (two on a layout variant), three
/// read the record page only.
struct NewsStudy {
    std::filesystem::path gaze, config, variants;
    std::vector<std::filesystem::path> snapshot_files;

    explicit NewsStudy(const std::filesystem::path& dir)
    {
        const auto news = load_fixture("news_page.json");
        const auto variant = load_fixture("news_page_variant.json");
        const auto record = load_fixture("record_page.json");
        std::vector<wordgaze::GazeSample> samples;
        nlohmann::json mapping = nlohmann::json::array();
        for (int p = 1; p <= 9; ++p) {
            const std::string id = "s" + std::to_string(p);
            if (p <= 6) {
                const bool on_variant = p >= 5;
                const auto& page = on_variant ? variant : news;
                append_trace(samples, page, stride_plan(page, 2 + p % 3, 120 + 20.0 * p), id, 0);
                mapping.push_back({{"participant", id},
                                   {"stimulus", page.stimulus_id},
                                   {"layout_hash", page.layout_hash}});
            }
            append_trace(samples, record, stride_plan(record, 4, 160), id, 50000);
        }
        gaze = dir / "news_gaze.csv";
        write_gaze_csv(gaze, samples);
        config = dir / "config.json";
        write_text(config, page_config_json());
        variants = dir / "variants.json";
        write_text(variants, mapping.dump());
        snapshot_files = {fixture("news_page.json"), fixture("news_page_variant.json"), fixture("record_page.json")};
    }

    wordgaze::ImportRequest request() const
    {
        wordgaze::ImportRequest r;
        r.gaze_files = {gaze};
        r.snapshot_files = snapshot_files;
        r.config = config;
        r.variants = variants;
        return r;
    }
};

} // namespace testsupport
