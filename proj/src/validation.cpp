#include "wordgaze/validation.hpp"
#include "wordgaze/csv.hpp"
#include "wordgaze/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace wordgaze {

double pearson(std::span<const double> xs, std::span<const double> ys)
{
    if (xs.size() != ys.size())
        throw ContractViolation("pearson: series differ in length");
    if (xs.size() < 2)
        throw ContractViolation("pearson: need at least two pairs");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw Error("pearson: correlation undefined for a constant series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

SeriesStats summary_stats(std::span<const double> xs)
{
    if (xs.empty())
        throw ContractViolation("summary_stats: empty series");
    SeriesStats s;
    s.n = xs.size();
    s.max = *std::max_element(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs)
        sum += x;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n == 1) {
        s.degenerate = true;
        return s;
    }
    double ss = 0.0;
    for (double x : xs)
        ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    return s;
}

std::vector<ReferencePoint> parse_reference_csv(std::istream& in)
{
    std::vector<std::string> header, f;
    std::string scratch;
    if (!csv::read_record(in, ',', header, scratch))
        throw ValidationError("reference CSV is empty", {});
    auto find = [&](const char* name) -> int {
        auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int cs = find("stimulus_id"), cv = find("seconds"), cp = find("participant");
    if (cs < 0 || cv < 0)
        throw ConfigError("reference CSV needs columns stimulus_id and seconds");
    std::vector<ReferencePoint> out;
    std::size_t line = 1;
    while (csv::read_record(in, ',', f, scratch)) {
        ++line;
        if (f.size() == 1 && f[0].empty())
            continue;
        ReferencePoint p;
        if (f.size() < header.size() || !csv::parse_double(f[cv], p.seconds))
            throw ValidationError("reference CSV line " + std::to_string(line) + " is malformed", {});
        p.stimulus_id = f[cs];
        if (cp >= 0)
            p.participant = f[cp];
        out.push_back(std::move(p));
    }
    return out;
}

std::string reference_key(const ReferencePoint& p)
{
    return p.participant ? *p.participant + "/" + p.stimulus_id : p.stimulus_id;
}

nlohmann::json ComparisonReport::to_json() const
{
    auto stats = [](const SeriesStats& s) {
        return nlohmann::json{{"n", s.n}, {"max", s.max}, {"mean", s.mean}, {"sd", s.sd}, {"degenerate", s.degenerate}};
    };
    return {{"reference", stats(stats_reference)},
            {"engine", stats(stats_engine)},
            {"pearson_r", pearson_r},
            {"n_pairs", n_pairs},
            {"keys", keys},
            {"reference_seconds", reference_seconds},
            {"engine_seconds", engine_seconds},
            {"unmatched_reference", unmatched_reference},
            {"unmatched_engine", unmatched_engine}};
}

ComparisonReport compare_aoi_series(std::span<const ReferencePoint> reference,
                                    const std::map<std::string, AoiMetrics>& engine)
{
    std::map<std::string, double> ref;
    for (const auto& p : reference)
        if (!ref.emplace(reference_key(p), p.seconds).second)
            throw ValidationError("reference lists '" + reference_key(p) + "' twice", {});

    ComparisonReport r;
    for (const auto& [key, seconds] : ref) {
        auto it = engine.find(key);
        if (it == engine.end()) {
            r.unmatched_reference.push_back(key);
            continue;
        }
        r.keys.push_back(key);
        r.reference_seconds.push_back(seconds);
        r.engine_seconds.push_back(it->second.fixation_time_ms / 1000.0);
    }
    for (const auto& [key, m] : engine)
        if (!ref.count(key))
            r.unmatched_engine.push_back(key);
    r.n_pairs = r.keys.size();
    if (r.n_pairs < 2)
        throw Error("compare_aoi_series: only " + std::to_string(r.n_pairs) + " matched stimuli, need at least 2");
    r.stats_reference = summary_stats(r.reference_seconds);
    r.stats_engine = summary_stats(r.engine_seconds);
    r.pearson_r = pearson(r.reference_seconds, r.engine_seconds);
    return r;
}

std::string format_comparison_table(const ComparisonReport& report, const std::string& aoi_name,
                                    const std::string& reference_tool, const std::string& engine_tool)
{
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s %-12s %10s %10s %10s %8s\n", "AOI", "Tool", "Max", "Mean", "SD", "Pearson");
    out += buf;
    std::snprintf(buf, sizeof buf, "%-12s %-12s %10.3f %10.3f %10.3f %8.3f\n", aoi_name.c_str(),
                  reference_tool.c_str(), report.stats_reference.max, report.stats_reference.mean,
                  report.stats_reference.sd, report.pearson_r);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-12s %-12s %10.3f %10.3f %10.3f %8s\n", aoi_name.c_str(), engine_tool.c_str(),
                  report.stats_engine.max, report.stats_engine.mean, report.stats_engine.sd, "");
    out += buf;
    std::snprintf(buf, sizeof buf, "n = %zu matched stimuli (%zu reference-only, %zu engine-only)\n", report.n_pairs,
                  report.unmatched_reference.size(), report.unmatched_engine.size());
    out += buf;
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic traces

std::vector<GazeSample> generate_reading_trace(const PageSnapshot& snap, std::span<const PlannedDwell> plan,
                                               const RecordingMeta& meta, const TraceOptions& options)
{
    if (!(meta.sample_rate_hz > 0.0))
        throw ContractViolation("generate_reading_trace: sample rate must be positive");
    const double period = meta.period_ms();
    for (const auto& p : plan) {
        if (p.word_id >= snap.words.size())
            throw ContractViolation("generate_reading_trace: planned word " + std::to_string(p.word_id) +
                                    " does not exist");
        if (!(p.dwell_ms >= period * (1.0 - 1e-9)))
            throw ContractViolation("generate_reading_trace: dwell below one sample period");
    }
    std::vector<GazeSample> out;
    if (plan.empty())
        return out;

    double right = 0.0;
    for (const auto& w : snap.words)
        right = std::max(right, w.x + w.w);
    const double margin_x = right + 200.0;

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, options.jitter_px > 0.0 ? options.jitter_px : 1.0);
    const std::string stimulus = options.stimulus_id.empty() ? snap.stimulus_id : options.stimulus_id;

    std::size_t k = 0;
    auto emit = [&](double x, double y) {
        GazeSample s;
        s.participant_id = options.participant_id;
        s.stimulus_id = stimulus;
        s.t_ms = options.start_ms + static_cast<double>(k++) * period;
        s.x = x;
        s.y = y;
        out.push_back(std::move(s));
    };
    auto center = [&](std::size_t id) {
        const WordBox& w = snap.words[id];
        return PagePoint{w.x + w.w / 2.0, w.y + w.h / 2.0};
    };
    auto jittered = [&](double c, double lo, double hi) {
        if (options.jitter_px <= 0.0)
            return c;
        for (int attempt = 0; attempt < 16; ++attempt) {
            const double v = c + noise(rng);
            if (v >= lo && v <= hi)
                return v;
        }
        return std::clamp(c + noise(rng), lo, hi);
    };

    for (std::size_t i = 0; i < plan.size(); ++i) {
        const WordBox& w = snap.words[plan[i].word_id];
        const PagePoint c = center(plan[i].word_id);
        if (i > 0) {
            const PagePoint prev = center(plan[i - 1].word_id);
            emit(margin_x, prev.y);
            emit(margin_x, c.y);
        }
        const auto n = static_cast<std::size_t>(std::llround(plan[i].dwell_ms / period));
        for (std::size_t s = 0; s < std::max<std::size_t>(n, 1); ++s)
            emit(jittered(c.x, w.x, w.x + w.w), jittered(c.y, w.y, w.y + w.h));
    }
    return out;
}

std::vector<PlannedDwell> plan_region_dwell(std::span<const std::size_t> word_ids, double total_ms, double period_ms,
                                            double min_word_ms)
{
    std::vector<PlannedDwell> out;
    if (word_ids.empty())
        return out;
    const auto samples = static_cast<std::size_t>(std::llround(total_ms / period_ms));
    if (samples == 0)
        return out;
    const auto min_samples = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(min_word_ms / period_ms)));
    const std::size_t words = std::clamp<std::size_t>(samples / min_samples, 1, word_ids.size());
    const std::size_t base = samples / words, extra = samples % words;
    for (std::size_t i = 0; i < words; ++i) {
        const std::size_t n = base + (i < extra ? 1 : 0);
        out.push_back(PlannedDwell{word_ids[i], static_cast<double>(n) * period_ms});
    }
    return out;
}

PageSnapshot synthesize_page(const std::string& stimulus_id, std::span<const TextBlock> blocks,
                             const PageLayout& layout)
{
    PageSnapshot snap;
    snap.stimulus_id = stimulus_id;
    snap.url = "https://example.org/" + stimulus_id;
    snap.viewport_width_px = layout.width_px;

    std::size_t pos = 0; // code points
    double y = layout.margin_px;
    const double right = layout.width_px - layout.margin_px;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        std::istringstream words(blocks[b].text);
        std::string word;
        double x = layout.margin_px;
        bool first_in_block = true;
        while (words >> word) {
            if (!snap.page_text.empty()) {
                snap.page_text.push_back(first_in_block ? '\n' : ' ');
                ++pos;
            }
            const std::size_t len = utf8::length(word);
            const double width = static_cast<double>(len) * layout.char_width_px;
            if (!first_in_block && x + width > right) {
                x = layout.margin_px;
                y += layout.line_height_px;
            }
            WordBox w;
            w.word_id = snap.words.size();
            w.text = word;
            w.char_start = pos;
            w.char_end = pos + len;
            w.x = x;
            w.y = y + (layout.line_height_px - layout.word_height_px) / 2.0;
            w.w = width;
            w.h = layout.word_height_px;
            w.dom_path = blocks[b].dom_path;
            w.labels = blocks[b].labels;
            std::sort(w.labels.begin(), w.labels.end());
            w.labels.erase(std::unique(w.labels.begin(), w.labels.end()), w.labels.end());
            snap.words.push_back(std::move(w));
            snap.page_text += word;
            pos += len;
            x += width + layout.char_width_px;
            first_in_block = false;
        }
        y += layout.line_height_px + layout.block_gap_px;
    }
    snap.layout_hash = compute_layout_hash(snap);
    return snap;
}

// ---------------------------------------------------------------------------
// Synthetic study

namespace {

std::string num(double v)
{
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string random_word(std::mt19937_64& rng)
{
    static constexpr const char* syllables[] = {"ar", "ce", "ti", "mo", "la", "ne", "ro", "su", "ka", "pe",
                                                "di", "on", "va", "li", "tu", "gra", "ste", "phy", "que", "me"};
    std::uniform_int_distribution<int> count(1, 4), pick(0, 19);
    std::string w;
    for (int i = count(rng); i > 0; --i)
        w += syllables[pick(rng)];
    return w;
}

std::string random_text(std::mt19937_64& rng, std::size_t words)
{
    std::string s;
    for (std::size_t i = 0; i < words; ++i) {
        if (i)
            s.push_back(' ');
        s += random_word(rng);
    }
    return s;
}

} // namespace

StudyFiles write_synthetic_study(const std::filesystem::path& dir, const StudySpec& spec)
{
    namespace fs = std::filesystem;
    if (spec.stimuli == 0 || spec.participants == 0 || spec.stimuli_per_participant == 0)
        throw ContractViolation("write_synthetic_study: empty study");
    StudyFiles files;
    files.gaze_csv = dir / "gaze.csv";
    files.snapshot_dir = dir / "snapshots";
    files.config = dir / "config.json";
    files.annotations = dir / "annotations.json";
    fs::create_directories(files.snapshot_dir);

    std::mt19937_64 rng(spec.seed);
    std::vector<PageSnapshot> pages;
    pages.reserve(spec.stimuli);
    const std::size_t body_words = spec.words_per_page > 40 ? spec.words_per_page - 40 : 10;
    for (std::size_t s = 0; s < spec.stimuli; ++s) {
        char id[32];
        std::snprintf(id, sizeof id, "stim%04zu", s);
        const std::vector<TextBlock> blocks{
            {random_text(rng, 8), {"record", "title"}, "html>body>div#record>h1.title"},
            {random_text(rng, 4), {"record", "authors"}, "html>body>div#record>p.authors"},
            {random_text(rng, 28), {"record", "abstract"}, "html>body>div#record>p.abstract"},
            {random_text(rng, body_words), {"body"}, "html>body>div.body>p"},
        };
        pages.push_back(synthesize_page(id, blocks));
        std::ofstream(files.snapshot_dir / (std::string(id) + ".json")) << serialize_snapshot(pages.back());
    }

    IngestConfig cfg;
    cfg.meta.sample_rate_hz = spec.sample_rate_hz;
    std::ofstream(files.config) << cfg.to_json().dump(2) << "\n";

    const RecordingMeta meta{spec.sample_rate_hz, std::nullopt};
    std::ofstream gaze(files.gaze_csv);
    gaze << "participant,stimulus,time_ms,x,y,valid\n";
    nlohmann::json annotations = nlohmann::json::array();
    std::uniform_real_distribution<double> dwell(122.0, 233.0);
    std::bernoulli_distribution skip(0.3);

    for (std::size_t p = 0; p < spec.participants; ++p) {
        char pid[32];
        std::snprintf(pid, sizeof pid, "p%03zu", p);
        double clock = 0.0;
        for (std::size_t k = 0; k < spec.stimuli_per_participant; ++k) {
            const PageSnapshot& page = pages[(p * spec.stimuli_per_participant + k) % spec.stimuli];
            std::vector<PlannedDwell> plan;
            std::size_t budget = 0, w = 0;
            const double period = meta.period_ms();
            while (budget < spec.samples_per_session) {
                const std::size_t id = w++ % page.words.size();
                if (skip(rng))
                    continue;
                const double ms = std::round(dwell(rng) / period) * period;
                budget += static_cast<std::size_t>(std::llround(ms / period)) + (plan.empty() ? 0 : 2);
                plan.push_back({id, ms});
            }
            TraceOptions opt;
            opt.participant_id = pid;
            opt.start_ms = clock;
            opt.jitter_px = 1.5;
            opt.seed = rng();
            auto trace = generate_reading_trace(page, plan, meta, opt);
            trace.resize(std::min(trace.size(), spec.samples_per_session));
            for (const auto& s : trace)
                gaze << s.participant_id << ',' << s.stimulus_id << ',' << num(s.t_ms) << ',' << num(s.x) << ','
                     << num(s.y) << ",1\n";
            files.samples += trace.size();
            ++files.sessions;
            clock = (trace.empty() ? clock : trace.back().t_ms) + 2000.0;
            annotations.push_back({{"participant", pid},
                                   {"stimulus", page.stimulus_id},
                                   {"values",
                                    {{"task_type", (p % 2) ? "B" : "A"},
                                     {"usefulness", std::to_string(1 + (k % 5))},
                                     {"bookmarked", (k % 3 == 0) ? "yes" : "no"}}}});
        }
    }
    std::ofstream(files.annotations) << annotations.dump(2) << "\n";
    return files;
}

} // namespace wordgaze
