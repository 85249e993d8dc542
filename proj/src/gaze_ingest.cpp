#include "wordgaze/gaze_ingest.hpp"
#include "wordgaze/csv.hpp"
#include "wordgaze/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace wordgaze {

const char* to_string(FrameKind kind)
{
    switch (kind) {
    case FrameKind::MonitorAbsolute: return "MonitorAbsolute";
    case FrameKind::ViewportRelative: return "ViewportRelative";
    case FrameKind::PageRelative: return "PageRelative";
    }
    return "?";
}

FrameKind frame_kind_from_string(const std::string& name)
{
    if (name == "MonitorAbsolute")
        return FrameKind::MonitorAbsolute;
    if (name == "ViewportRelative")
        return FrameKind::ViewportRelative;
    if (name == "PageRelative")
        return FrameKind::PageRelative;
    throw ConfigError("unknown frame kind '" + name + "'");
}

double px_per_degree(double viewing_distance_mm, double pixels_per_inch)
{
    constexpr double pi = 3.14159265358979323846;
    const double mm = 2.0 * viewing_distance_mm * std::tan(0.5 * pi / 180.0);
    return mm / 25.4 * pixels_per_inch;
}

void IngestConfig::validate() const
{
    if (!(meta.sample_rate_hz > 0.0) || !std::isfinite(meta.sample_rate_hz))
        throw ConfigError("sample_rate_hz must be positive");
    if (meta.screen_px_per_degree && !(*meta.screen_px_per_degree > 0.0))
        throw ConfigError("screen_px_per_degree must be positive");
    if (frame.chrome_offset_x < 0.0 || frame.chrome_offset_y < 0.0)
        throw ConfigError("chrome offsets must be >= 0");
    if (out_of_page_slack_px < 0.0)
        throw ConfigError("out_of_page_slack_px must be >= 0");
    if (!(revisit_threshold_ms > 0.0))
        throw ConfigError("revisit_threshold_ms must be positive");
    if (delimiter == '"' || delimiter == '\n' || delimiter == '\r')
        throw ConfigError("invalid delimiter");
}

IngestConfig IngestConfig::from_json(const nlohmann::json& j)
{
    IngestConfig c;
    try {
        if (j.contains("delimiter")) {
            const auto d = j.at("delimiter").get<std::string>();
            if (d == "\\t" || d == "tab")
                c.delimiter = '\t';
            else if (d.size() == 1)
                c.delimiter = d[0];
            else
                throw ConfigError("delimiter must be one character");
        }
        if (j.contains("columns")) {
            const auto& col = j.at("columns");
            auto pick = [&](const char* key, std::string& dst) {
                if (col.contains(key))
                    dst = col.at(key).get<std::string>();
            };
            pick("participant", c.columns.participant);
            pick("stimulus", c.columns.stimulus);
            pick("time_ms", c.columns.time);
            pick("x", c.columns.x);
            pick("y", c.columns.y);
            pick("scroll_x", c.columns.scroll_x);
            pick("scroll_y", c.columns.scroll_y);
            pick("valid", c.columns.valid);
        }
        if (j.contains("frame")) {
            const auto& f = j.at("frame");
            c.frame.kind = frame_kind_from_string(f.value("kind", std::string("PageRelative")));
            c.frame.chrome_offset_x = f.value("chrome_offset_x", 0.0);
            c.frame.chrome_offset_y = f.value("chrome_offset_y", 0.0);
        }
        c.meta.sample_rate_hz = j.value("sample_rate_hz", c.meta.sample_rate_hz);
        if (j.contains("screen_px_per_degree") && !j.at("screen_px_per_degree").is_null())
            c.meta.screen_px_per_degree = j.at("screen_px_per_degree").get<double>();
        if (j.contains("dropout_markers"))
            c.dropout_markers = j.at("dropout_markers").get<std::vector<std::string>>();
        c.out_of_page_slack_px = j.value("out_of_page_slack_px", c.out_of_page_slack_px);
        c.revisit_threshold_ms = j.value("revisit_threshold_ms", c.revisit_threshold_ms);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("ingest config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json IngestConfig::to_json() const
{
    nlohmann::json j;
    j["delimiter"] = delimiter == '\t' ? std::string("\\t") : std::string(1, delimiter);
    j["columns"] = {{"participant", columns.participant}, {"stimulus", columns.stimulus},
                    {"time_ms", columns.time},           {"x", columns.x},
                    {"y", columns.y},                     {"scroll_x", columns.scroll_x},
                    {"scroll_y", columns.scroll_y},       {"valid", columns.valid}};
    j["frame"] = {{"kind", to_string(frame.kind)},
                  {"chrome_offset_x", frame.chrome_offset_x},
                  {"chrome_offset_y", frame.chrome_offset_y}};
    j["sample_rate_hz"] = meta.sample_rate_hz;
    j["screen_px_per_degree"] = meta.screen_px_per_degree ? nlohmann::json(*meta.screen_px_per_degree)
                                                          : nlohmann::json(nullptr);
    j["dropout_markers"] = dropout_markers;
    j["out_of_page_slack_px"] = out_of_page_slack_px;
    j["revisit_threshold_ms"] = revisit_threshold_ms;
    return j;
}

IngestConfig load_ingest_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return IngestConfig::from_json(j);
}

// ---------------------------------------------------------------------------

GazeCsvReader::GazeCsvReader(std::istream& in, IngestConfig config)
    : in_(in), config_(std::move(config))
{
    config_.validate();
    if (!csv::read_record(in_, config_.delimiter, header_, scratch_))
        throw ConfigError("gaze CSV has no header row");
    if (!header_.empty() && header_[0].starts_with("\xEF\xBB\xBF"))
        header_[0].erase(0, 3);
    for (auto& h : header_) {
        while (!h.empty() && std::isspace(static_cast<unsigned char>(h.back())))
            h.pop_back();
        while (!h.empty() && std::isspace(static_cast<unsigned char>(h.front())))
            h.erase(h.begin());
    }

    auto find = [&](const std::string& name) -> int {
        auto it = std::find(header_.begin(), header_.end(), name);
        return it == header_.end() ? -1 : static_cast<int>(it - header_.begin());
    };
    auto require = [&](const std::string& name) {
        const int c = find(name);
        if (c < 0)
            throw ConfigError("gaze CSV: mapped column '" + name + "' not found in header");
        return c;
    };
    col_participant_ = require(config_.columns.participant);
    col_stimulus_ = require(config_.columns.stimulus);
    col_time_ = require(config_.columns.time);
    col_x_ = require(config_.columns.x);
    col_y_ = require(config_.columns.y);
    col_scroll_x_ = find(config_.columns.scroll_x);
    col_scroll_y_ = find(config_.columns.scroll_y);
    col_valid_ = find(config_.columns.valid);
}

bool GazeCsvReader::is_dropout(const std::string& cell) const
{
    return std::find(config_.dropout_markers.begin(), config_.dropout_markers.end(), cell) !=
           config_.dropout_markers.end();
}

void GazeCsvReader::reject(std::size_t column, std::string message)
{
    ++report_.skipped_rows;
    if (report_.errors.size() < ParseReport::max_stored_errors) {
        std::string name = column < header_.size() ? header_[column] : std::string();
        report_.errors.push_back(RowError{line_, std::move(name), std::move(message)});
    }
}

namespace {

bool parse_flag(std::string_view cell, bool& out)
{
    std::string s(cell);
    for (auto& ch : s)
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (s == "1" || s == "true" || s == "valid" || s == "yes") {
        out = true;
        return true;
    }
    if (s == "0" || s == "false" || s == "invalid" || s == "no") {
        out = false;
        return true;
    }
    return false;
}

} // namespace

bool GazeCsvReader::next(GazeSample& out)
{
    const bool page_relative = config_.frame.kind == FrameKind::PageRelative;
    while (csv::read_record(in_, config_.delimiter, fields_, scratch_)) {
        ++line_;
        if (fields_.size() == 1 && fields_[0].empty())
            continue; // blank line
        ++report_.rows;
        if (fields_.size() < header_.size()) {
            reject(fields_.size(), "row has " + std::to_string(fields_.size()) + " fields, header has " +
                                       std::to_string(header_.size()));
            continue;
        }

        out.participant_id = fields_[col_participant_];
        out.stimulus_id = fields_[col_stimulus_];
        if (out.participant_id.empty() || out.stimulus_id.empty()) {
            reject(out.participant_id.empty() ? col_participant_ : col_stimulus_, "empty id");
            continue;
        }
        if (!csv::parse_double(fields_[col_time_], out.t_ms) || out.t_ms < 0.0) {
            reject(col_time_, "bad timestamp '" + fields_[col_time_] + "'");
            continue;
        }

        out.valid = true;
        if (col_valid_ >= 0 && !is_dropout(fields_[col_valid_])) {
            if (!parse_flag(fields_[col_valid_], out.valid)) {
                reject(col_valid_, "bad validity flag '" + fields_[col_valid_] + "'");
                continue;
            }
        }

        bool bad = false;
        auto coord = [&](int col, double& dst) {
            const std::string& cell = fields_[col];
            if (is_dropout(cell)) {
                out.valid = false;
                dst = 0.0;
                return;
            }
            if (!csv::parse_double(cell, dst)) {
                reject(col, "bad number '" + cell + "'");
                bad = true;
            }
        };
        coord(col_x_, out.x);
        if (bad)
            continue;
        coord(col_y_, out.y);
        if (bad)
            continue;

        out.scroll_x = out.scroll_y = 0.0;
        if (!page_relative) {
            auto scroll = [&](int col, double& dst) {
                if (col < 0 || is_dropout(fields_[col]))
                    return;
                if (!csv::parse_double(fields_[col], dst) || dst < 0.0) {
                    reject(col, "bad scroll offset '" + fields_[col] + "'");
                    bad = true;
                }
            };
            scroll(col_scroll_x_, out.scroll_x);
            if (bad)
                continue;
            scroll(col_scroll_y_, out.scroll_y);
            if (bad)
                continue;
        }

        ++report_.samples;
        if (!out.valid)
            ++report_.invalid_samples;
        return true;
    }
    return false;
}

std::vector<GazeSample> parse_gaze_csv(std::istream& in, const IngestConfig& config, ParseReport* report)
{
    GazeCsvReader reader(in, config);
    std::vector<GazeSample> out;
    GazeSample s;
    while (reader.next(s))
        out.push_back(s);
    if (report)
        *report = reader.report();
    return out;
}

PageMapping normalize_to_page(const SessionSample& s, const CoordinateFrame& frame, double slack_px)
{
    if (!s.valid)
        throw ContractViolation("normalize_to_page: sample is not valid");
    PageMapping m;
    switch (frame.kind) {
    case FrameKind::MonitorAbsolute:
        m.point = {s.x - frame.chrome_offset_x + s.scroll_x, s.y - frame.chrome_offset_y + s.scroll_y};
        break;
    case FrameKind::ViewportRelative:
        m.point = {s.x + s.scroll_x, s.y + s.scroll_y};
        break;
    case FrameKind::PageRelative:
        m.point = {s.x, s.y};
        break;
    }
    m.out_of_page = m.point.x < -slack_px || m.point.y < -slack_px;
    return m;
}

PageMapping normalize_to_page(const GazeSample& s, const CoordinateFrame& frame, double slack_px)
{
    return normalize_to_page(SessionSample{s.t_ms, s.x, s.y, s.scroll_x, s.scroll_y, s.valid}, frame, slack_px);
}

// ---------------------------------------------------------------------------

void finalize_session(Session& session)
{
    auto& v = session.samples;
    std::stable_sort(v.begin(), v.end(),
                     [](const SessionSample& a, const SessionSample& b) { return a.t_ms < b.t_ms; });
    session.visits.clear();
    if (v.empty()) {
        session.first_ms = session.last_ms = 0.0;
        return;
    }
    session.first_ms = v.front().t_ms;
    session.last_ms = v.back().t_ms;
    VisitSegment seg{0, 0, v.front().t_ms, v.front().t_ms};
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i].t_ms - v[i - 1].t_ms > session.revisit_threshold_ms) {
            seg.end = i;
            seg.end_ms = v[i - 1].t_ms;
            session.visits.push_back(seg);
            seg = VisitSegment{i, i, v[i].t_ms, v[i].t_ms};
        }
    }
    seg.end = v.size();
    seg.end_ms = v.back().t_ms;
    session.visits.push_back(seg);
}

void SessionBuilder::add(const GazeSample& s, const IngestConfig& config)
{
    SessionKey key{s.participant_id, s.stimulus_id};
    auto it = sessions_.find(key);
    if (it == sessions_.end()) {
        Session fresh;
        fresh.key = key;
        fresh.frame = config.frame;
        fresh.meta = config.meta;
        fresh.out_of_page_slack_px = config.out_of_page_slack_px;
        fresh.revisit_threshold_ms = config.revisit_threshold_ms;
        it = sessions_.emplace(key, std::move(fresh)).first;
    } else {
        const Session& cur = it->second;
        if (cur.frame.kind != config.frame.kind || cur.frame.chrome_offset_x != config.frame.chrome_offset_x ||
            cur.frame.chrome_offset_y != config.frame.chrome_offset_y ||
            cur.meta.sample_rate_hz != config.meta.sample_rate_hz)
            throw ConfigError("session " + key.participant_id + "/" + key.stimulus_id +
                              " mixes recordings with different coordinate frames or sample rates");
    }
    it->second.samples.push_back(SessionSample{s.t_ms, s.x, s.y, s.scroll_x, s.scroll_y, s.valid});
    ++count_;
}

SessionMap SessionBuilder::finish() &&
{
    for (auto& [key, session] : sessions_)
        finalize_session(session);
    return std::move(sessions_);
}

SessionMap sessionize(std::span<const GazeSample> samples, const IngestConfig& config)
{
    SessionBuilder b;
    for (const auto& s : samples)
        b.add(s, config);
    return std::move(b).finish();
}

std::map<std::string, std::vector<SessionKey>> chronological_order(const SessionMap& sessions)
{
    std::map<std::string, std::vector<const Session*>> by_participant;
    for (const auto& [key, s] : sessions)
        by_participant[key.participant_id].push_back(&s);
    std::map<std::string, std::vector<SessionKey>> out;
    for (auto& [p, list] : by_participant) {
        std::stable_sort(list.begin(), list.end(), [](const Session* a, const Session* b) {
            if (a->first_ms != b->first_ms)
                return a->first_ms < b->first_ms;
            return a->key.stimulus_id < b->key.stimulus_id;
        });
        auto& keys = out[p];
        for (const Session* s : list)
            keys.push_back(s->key);
    }
    return out;
}

std::map<SessionKey, std::vector<ScrollEvent>> parse_scroll_log(std::istream& in, char delimiter)
{
    std::vector<std::string> header, fields;
    std::string scratch;
    if (!csv::read_record(in, delimiter, header, scratch))
        throw ConfigError("scroll log has no header row");
    auto col = [&](const char* name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ConfigError(std::string("scroll log: column '") + name + "' not found");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto cp = col("participant"), cs = col("stimulus"), ct = col("time_ms"), cx = col("scroll_x"),
               cy = col("scroll_y");
    std::map<SessionKey, std::vector<ScrollEvent>> out;
    std::size_t line = 1;
    while (csv::read_record(in, delimiter, fields, scratch)) {
        ++line;
        if (fields.size() == 1 && fields[0].empty())
            continue;
        ScrollEvent e;
        if (fields.size() < header.size() || !csv::parse_double(fields[ct], e.t_ms) ||
            !csv::parse_double(fields[cx], e.scroll_x) || !csv::parse_double(fields[cy], e.scroll_y))
            throw ValidationError("scroll log line " + std::to_string(line) + " is malformed", {});
        out[SessionKey{fields[cp], fields[cs]}].push_back(e);
    }
    for (auto& [k, v] : out)
        std::stable_sort(v.begin(), v.end(),
                         [](const ScrollEvent& a, const ScrollEvent& b) { return a.t_ms < b.t_ms; });
    return out;
}

void apply_scroll_log(Session& session, std::span<const ScrollEvent> events)
{
    if (session.frame.kind == FrameKind::PageRelative)
        return;
    std::size_t e = 0;
    double sx = 0.0, sy = 0.0;
    for (auto& s : session.samples) {
        while (e < events.size() && events[e].t_ms <= s.t_ms) {
            sx = events[e].scroll_x;
            sy = events[e].scroll_y;
            ++e;
        }
        s.scroll_x = sx;
        s.scroll_y = sy;
    }
}

} // namespace wordgaze
