#include "wordgaze/workspace.hpp"
#include "wordgaze/csv.hpp"
#include "wordgaze/digest.hpp"
#include "wordgaze/error.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace wordgaze {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class FileLock {
public:
    explicit FileLock(const fs::path& path)
    {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0)
            throw Error("cannot open lock file " + path.string());
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            throw Error("workspace is locked by another writer (" + path.string() + ")");
        }
    }
    ~FileLock()
    {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& path)
{
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + " is not valid JSON", {e.what()});
    }
}

void write_atomic(const fs::path& path, std::string_view content)
{
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out)
            throw Error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

/// Files written by one workspace transaction; removed again unless committed.
class Staging {
public:
    explicit Staging(fs::path root) : root_(std::move(root)) {}
    ~Staging()
    {
        if (committed_)
            return;
        std::error_code ec;
        for (const auto& rel : created_)
            fs::remove(root_ / rel, ec);
    }
    Staging(const Staging&) = delete;
    Staging& operator=(const Staging&) = delete;

    /// Stores content under dir/<sha256><ext>; returns the path relative to root.
    std::string store(const std::string& dir, std::string_view content, const std::string& ext)
    {
        const std::string rel = dir + "/" + sha256_hex(content) + ext;
        put(rel, content);
        return rel;
    }
    void put(const std::string& rel, std::string_view content)
    {
        if (fs::exists(root_ / rel))
            return;
        write_atomic(root_ / rel, content);
        created_.push_back(rel);
    }
    void copy(const std::string& rel, const fs::path& source)
    {
        if (fs::exists(root_ / rel))
            return;
        fs::create_directories((root_ / rel).parent_path());
        const fs::path tmp = (root_ / rel).string() + ".tmp";
        fs::copy_file(source, tmp, fs::copy_options::overwrite_existing);
        fs::rename(tmp, root_ / rel);
        created_.push_back(rel);
    }
    void commit() { committed_ = true; }

private:
    fs::path root_;
    std::vector<std::string> created_;
    bool committed_ = false;
};

json empty_manifest()
{
    return {{"format", "wordgaze-workspace"},
            {"version", workspace_version},
            {"params", ProcessParams{}.to_json()},
            {"inputs", json::array()},
            {"snapshots", json::object()},
            {"variants", json::array()},
            {"annotations", nullptr},
            {"participants", json::array()},
            {"stimuli", json::array()},
            {"sessions", json::array()}};
}

json load_manifest(const fs::path& root)
{
    const fs::path p = root / "manifest.json";
    if (!fs::exists(p))
        return empty_manifest();
    json m = read_json(p);
    if (m.value("format", std::string()) != "wordgaze-workspace" || m.value("version", 0) != workspace_version)
        throw ValidationError("workspace manifest has an unsupported format or version", {p.string()});
    return m;
}

void write_manifest(const fs::path& root, const json& manifest)
{
    write_atomic(root / "manifest.json", manifest.dump(1) + "\n");
}

json session_report_json(const SessionReport& r)
{
    return {{"samples", r.samples},
            {"valid_samples", r.valid_samples},
            {"out_of_page", r.out_of_page},
            {"fixations", r.fixations},
            {"fixation_samples", r.fixation_samples},
            {"fixation_dwell_ms", r.fixation_dwell_ms},
            {"word_dwell_ms", r.word_dwell_ms}};
}

SessionReport session_report_from(const json& j)
{
    SessionReport r;
    r.samples = j.value("samples", std::size_t{0});
    r.valid_samples = j.value("valid_samples", std::size_t{0});
    r.out_of_page = j.value("out_of_page", std::size_t{0});
    r.fixations = j.value("fixations", std::size_t{0});
    r.fixation_samples = j.value("fixation_samples", std::size_t{0});
    r.fixation_dwell_ms = j.value("fixation_dwell_ms", 0.0);
    r.word_dwell_ms = j.value("word_dwell_ms", 0.0);
    return r;
}

std::vector<fs::path> expand_snapshot_paths(const std::vector<fs::path>& given)
{
    std::vector<fs::path> out;
    for (const auto& p : given) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file() && e.path().extension() == ".json")
                    found.push_back(e.path());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::exists(p)) {
            out.push_back(p);
        } else {
            throw Error("snapshot path not found: " + p.string());
        }
    }
    return out;
}

} // namespace

Workspace::Workspace(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

json Workspace::manifest() const { return load_manifest(root_); }

ProcessParams Workspace::params() const { return ProcessParams::from_json(manifest().at("params")); }

ImportSummary Workspace::import(const ImportRequest& request)
{
    FileLock lock(root_ / ".lock");
    json manifest = load_manifest(root_);
    ImportSummary summary;
    bool changed = false;

    // Everything is validated before the first byte is written.
    IngestConfig config;
    if (request.config)
        config = load_ingest_config(request.config->string());
    const std::string config_text = config.to_json().dump(1) + "\n";
    const std::string config_rel = "raw/config/" + sha256_hex(config_text) + ".json";

    std::optional<std::string> scroll_text, scroll_rel;
    if (request.scroll_log) {
        scroll_text = read_file(*request.scroll_log);
        std::istringstream probe(*scroll_text);
        parse_scroll_log(probe, config.delimiter);
        scroll_rel = "raw/scroll/" + sha256_hex(*scroll_text) + ".csv";
    }

    std::vector<std::pair<std::string, fs::path>> gaze_copies;
    auto& inputs = manifest["inputs"];
    for (const auto& path : request.gaze_files) {
        {
            std::ifstream probe(path, std::ios::binary);
            if (!probe)
                throw Error("cannot open gaze file " + path.string());
            GazeCsvReader header_check(probe, config);
        }
        const std::string gaze_rel = "raw/gaze/" + sha256_file(path) + ".csv";
        json entry{{"gaze", gaze_rel},
                   {"config", config_rel},
                   {"scroll_log", scroll_rel ? json(*scroll_rel) : json(nullptr)}};
        const bool known = std::any_of(inputs.begin(), inputs.end(), [&](const json& in) {
            return in.at("gaze") == entry.at("gaze") && in.at("config") == entry.at("config") &&
                   in.at("scroll_log") == entry.at("scroll_log");
        });
        if (known)
            continue;
        gaze_copies.emplace_back(gaze_rel, path);
        inputs.push_back(std::move(entry));
        ++summary.new_inputs;
        changed = true;
    }
    std::sort(inputs.begin(), inputs.end(), [](const json& a, const json& b) { return a.dump() < b.dump(); });

    std::vector<std::pair<std::string, std::string>> snapshot_writes;
    auto& snapshots = manifest["snapshots"];
    for (const auto& path : expand_snapshot_paths(request.snapshot_files)) {
        const PageSnapshot snap = load_snapshot_file(path);
        if (snapshots.contains(snap.layout_hash))
            continue;
        const std::string rel = "snapshots/" + snap.layout_hash + ".json";
        snapshot_writes.emplace_back(rel, serialize_snapshot(snap));
        snapshots[snap.layout_hash] = {{"stimulus", snap.stimulus_id}, {"file", rel}, {"words", snap.words.size()}};
        ++summary.new_snapshots;
        changed = true;
    }

    std::optional<std::string> annotations_text;
    if (request.annotations) {
        AnnotationMap current;
        if (!manifest["annotations"].is_null())
            current = parse_annotations(read_json(root_ / manifest["annotations"].get<std::string>()));
        for (auto& [key, a] : parse_annotations(read_json(*request.annotations)))
            for (auto& [k, v] : a.values)
                current[key].values[k] = v;
        annotations_text = annotations_to_json(current).dump(1) + "\n";
        const std::string rel = "annotations/" + sha256_hex(*annotations_text) + ".json";
        if (manifest["annotations"] != json(rel)) {
            manifest["annotations"] = rel;
            changed = true;
        }
    }

    if (request.variants) {
        const json given = read_json(*request.variants);
        if (!given.is_array())
            throw ValidationError("variant mapping must be a JSON array", {request.variants->string()});
        auto& variants = manifest["variants"];
        for (const auto& v : given) {
            json entry{{"participant", v.at("participant")},
                       {"stimulus", v.at("stimulus")},
                       {"layout_hash", v.at("layout_hash")}};
            auto it = std::find_if(variants.begin(), variants.end(), [&](const json& e) {
                return e.at("participant") == entry.at("participant") && e.at("stimulus") == entry.at("stimulus");
            });
            if (it == variants.end()) {
                variants.push_back(entry);
                changed = true;
            } else if (*it != entry) {
                *it = entry;
                changed = true;
            }
        }
        std::sort(variants.begin(), variants.end(), [](const json& a, const json& b) { return a.dump() < b.dump(); });
    }

    if (!changed)
        return summary;

    Staging staging(root_);
    if (!gaze_copies.empty())
        staging.put(config_rel, config_text);
    if (scroll_text && !gaze_copies.empty())
        staging.put(*scroll_rel, *scroll_text);
    for (const auto& [rel, path] : gaze_copies)
        staging.copy(rel, path);
    for (const auto& [rel, text] : snapshot_writes)
        staging.put(rel, text);
    if (annotations_text)
        staging.store("annotations", *annotations_text, ".json");

    summary.changed = true;
    const ProcessParams params = ProcessParams::from_json(manifest.at("params"));
    summary = rebuild(std::move(manifest), params, std::move(summary));
    staging.commit();
    return summary;
}

ImportSummary Workspace::process(const ProcessParams& params)
{
    params.validate();
    FileLock lock(root_ / ".lock");
    json manifest = load_manifest(root_);
    ImportSummary summary;
    summary.changed = true;
    return rebuild(std::move(manifest), params, std::move(summary));
}

ImportSummary Workspace::rebuild(json manifest, const ProcessParams& params, ImportSummary summary)
{
    manifest["params"] = params.to_json();

    // Stream every stored gaze file into sessions.
    SessionBuilder builder;
    std::map<SessionKey, std::string> scroll_of;
    for (auto& input : manifest["inputs"]) {
        const IngestConfig cfg = IngestConfig::from_json(read_json(root_ / input.at("config").get<std::string>()));
        std::ifstream in(root_ / input.at("gaze").get<std::string>(), std::ios::binary);
        if (!in)
            throw Error("workspace is missing " + input.at("gaze").get<std::string>());
        GazeCsvReader reader(in, cfg);
        const bool use_scroll_log = !input.at("scroll_log").is_null() && !reader.has_scroll_columns();
        GazeSample s;
        while (reader.next(s)) {
            if (use_scroll_log)
                scroll_of[{s.participant_id, s.stimulus_id}] = input.at("scroll_log").get<std::string>();
            builder.add(s, cfg);
        }
        const ParseReport& rep = reader.report();
        input["rows"] = rep.rows;
        input["samples"] = rep.samples;
        input["skipped_rows"] = rep.skipped_rows;
        summary.samples += rep.samples;
        summary.skipped_rows += rep.skipped_rows;
        for (std::size_t i = 0; i < rep.errors.size() && i < 5; ++i)
            summary.warnings.push_back(input.at("gaze").get<std::string>() + " line " +
                                       std::to_string(rep.errors[i].line) + ": " + rep.errors[i].message);
    }
    SessionMap sessions = std::move(builder).finish();

    std::map<std::string, std::map<SessionKey, std::vector<ScrollEvent>>> scroll_logs;
    for (auto& [key, rel] : scroll_of) {
        auto it = scroll_logs.find(rel);
        if (it == scroll_logs.end()) {
            std::ifstream in(root_ / rel);
            it = scroll_logs.emplace(rel, parse_scroll_log(in)).first;
        }
        if (auto ev = it->second.find(key); ev != it->second.end())
            apply_scroll_log(sessions.at(key), ev->second);
    }

    // Resolve the snapshot of every session.
    std::map<std::string, std::vector<std::string>> layouts_of;
    for (const auto& [hash, info] : manifest["snapshots"].items())
        layouts_of[info.at("stimulus").get<std::string>()].push_back(hash);
    std::map<SessionKey, std::string> variant_of;
    for (const auto& v : manifest["variants"])
        variant_of[{v.at("participant").get<std::string>(), v.at("stimulus").get<std::string>()}] =
            v.at("layout_hash").get<std::string>();

    std::map<std::string, std::pair<PageSnapshot, SpatialIndex>> pages;
    std::vector<SessionJob> jobs;
    std::vector<std::string> job_layout;
    for (const auto& [key, session] : sessions) {
        std::string layout;
        if (auto v = variant_of.find(key); v != variant_of.end()) {
            if (manifest["snapshots"].contains(v->second))
                layout = v->second;
            else
                summary.warnings.push_back("variant " + v->second + " for " + key.participant_id + "/" +
                                           key.stimulus_id + " is not imported");
        } else if (auto l = layouts_of.find(key.stimulus_id); l != layouts_of.end()) {
            layout = l->second.front();
            if (l->second.size() > 1)
                summary.warnings.push_back("stimulus " + key.stimulus_id + " has " + std::to_string(l->second.size()) +
                                           " layout variants and no variant mapping for " + key.participant_id +
                                           "; using " + layout);
        } else {
            summary.warnings.push_back("no snapshot for stimulus " + key.stimulus_id + "; session " +
                                       key.participant_id + "/" + key.stimulus_id + " left unprocessed");
        }
        SessionJob job{&session, nullptr, nullptr};
        if (!layout.empty()) {
            auto it = pages.find(layout);
            if (it == pages.end()) {
                PageSnapshot snap = load_snapshot_file(root_ / manifest["snapshots"][layout].at("file").get<std::string>());
                SpatialIndex index = build_index(snap, params.slop_px);
                it = pages.emplace(layout, std::make_pair(std::move(snap), std::move(index))).first;
            }
            job.snapshot = &it->second.first;
            job.index = &it->second.second;
        }
        jobs.push_back(job);
        job_layout.push_back(layout);
    }

    std::vector<SessionResult> results = process_sessions(jobs, params);

    const auto chrono = chronological_order(sessions);
    std::map<SessionKey, std::size_t> chrono_index;
    for (const auto& [p, keys] : chrono)
        for (std::size_t i = 0; i < keys.size(); ++i)
            chrono_index[keys[i]] = i;

    json session_entries = json::array();
    std::set<std::string> referenced;
    std::map<std::string, std::set<std::string>> visitors;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const Session& s = *jobs[i].session;
        SessionResult& r = results[i];
        visitors[s.key.stimulus_id].insert(s.key.participant_id);
        json visits = json::array();
        for (const auto& v : s.visits)
            visits.push_back({v.start_ms, v.end_ms});
        json e{{"participant", s.key.participant_id},
               {"stimulus", s.key.stimulus_id},
               {"chronological_index", chrono_index.at(s.key)},
               {"first_ms", s.first_ms},
               {"last_ms", s.last_ms},
               {"visits", visits},
               {"processed", r.processed},
               {"layout_hash", job_layout[i].empty() ? json(nullptr) : json(job_layout[i])},
               {"report", session_report_json(r.report)},
               {"params", params.to_json()},
               {"derived", nullptr}};
        if (r.processed) {
            WefStore store{s.key, job_layout[i], params.to_json(), std::move(r.words)};
            const std::string text = wef_store_to_json(store).dump(1) + "\n";
            const std::string rel = "derived/" + sha256_hex(text) + ".json";
            if (!fs::exists(root_ / rel))
                write_atomic(root_ / rel, text);
            e["derived"] = rel;
            referenced.insert(rel);
            ++summary.processed_sessions;
        }
        session_entries.push_back(std::move(e));
        r.idt = {};
    }
    std::stable_sort(session_entries.begin(), session_entries.end(), [](const json& a, const json& b) {
        if (a.at("participant") != b.at("participant"))
            return a.at("participant").get<std::string>() < b.at("participant").get<std::string>();
        return a.at("chronological_index").get<std::size_t>() < b.at("chronological_index").get<std::size_t>();
    });
    summary.sessions = session_entries.size();

    std::set<std::string> participants;
    for (const auto& [key, s] : sessions)
        participants.insert(key.participant_id);
    std::set<std::string> stimulus_ids;
    for (const auto& [key, s] : sessions)
        stimulus_ids.insert(key.stimulus_id);
    for (const auto& [stim, hashes] : layouts_of)
        stimulus_ids.insert(stim);
    json stimuli = json::array();
    for (const auto& id : stimulus_ids) {
        auto hashes = layouts_of.count(id) ? layouts_of[id] : std::vector<std::string>{};
        stimuli.push_back({{"id", id}, {"visitors", visitors[id].size()}, {"layout_hashes", hashes}});
    }

    manifest["participants"] = participants;
    manifest["stimuli"] = std::move(stimuli);
    manifest["sessions"] = std::move(session_entries);
    write_manifest(root_, manifest);

    // Derived files from earlier parameter sets are no longer referenced.
    if (fs::exists(root_ / "derived"))
        for (const auto& e : fs::directory_iterator(root_ / "derived"))
            if (!referenced.count("derived/" + e.path().filename().string()))
                fs::remove(e.path());
    return summary;
}

// ---------------------------------------------------------------------------
// Read side

WorkspaceView WorkspaceView::load(const fs::path& root)
{
    if (!fs::exists(root / "manifest.json"))
        throw Error("no workspace manifest in " + root.string());
    const json m = load_manifest(root);
    WorkspaceView v;
    v.params_ = ProcessParams::from_json(m.at("params"));
    v.participants_ = m.at("participants").get<std::vector<std::string>>();
    for (const auto& s : m.at("stimuli"))
        v.stimuli_.push_back(StimulusInfo{s.at("id").get<std::string>(), s.at("visitors").get<std::size_t>(),
                                          s.at("layout_hashes").get<std::vector<std::string>>()});
    for (const auto& [hash, info] : m.at("snapshots").items())
        v.snapshots_[hash] =
            std::make_shared<const PageSnapshot>(load_snapshot_file(root / info.at("file").get<std::string>()));
    for (const auto& e : m.at("sessions")) {
        SessionRecord r;
        r.key = {e.at("participant").get<std::string>(), e.at("stimulus").get<std::string>()};
        r.chronological_index = e.at("chronological_index").get<std::size_t>();
        r.processed = e.at("processed").get<bool>();
        if (!e.at("layout_hash").is_null())
            r.layout_hash = e.at("layout_hash").get<std::string>();
        if (!e.at("derived").is_null())
            r.derived_file = e.at("derived").get<std::string>();
        r.report = session_report_from(e.at("report"));
        r.first_ms = e.at("first_ms").get<double>();
        r.last_ms = e.at("last_ms").get<double>();
        r.visits = e.at("visits").size();
        if (r.processed)
            v.words_[r.key] = wef_store_from_json(read_json(root / r.derived_file)).entries;
        v.session_pos_[r.key] = v.sessions_.size();
        v.sessions_.push_back(std::move(r));
    }
    if (!m.at("annotations").is_null())
        v.annotations_ = parse_annotations(read_json(root / m.at("annotations").get<std::string>()));
    return v;
}

const SessionRecord* WorkspaceView::find_session(const SessionKey& key) const
{
    auto it = session_pos_.find(key);
    return it == session_pos_.end() ? nullptr : &sessions_[it->second];
}

const PageSnapshot* WorkspaceView::snapshot(const std::string& layout_hash) const
{
    auto it = snapshots_.find(layout_hash);
    return it == snapshots_.end() ? nullptr : it->second.get();
}

const std::vector<WordEyeFixation>& WorkspaceView::words(const SessionKey& key) const
{
    static const std::vector<WordEyeFixation> none;
    auto it = words_.find(key);
    return it == words_.end() ? none : it->second;
}

const StimulusInfo* WorkspaceView::find_stimulus(const std::string& id) const
{
    for (const auto& s : stimuli_)
        if (s.stimulus_id == id)
            return &s;
    return nullptr;
}

namespace {

std::vector<const SessionRecord*> select_sessions(const WorkspaceView& view, const QueryFilter& f,
                                                  std::vector<std::string>* not_found)
{
    if (not_found) {
        if (!f.all_participants)
            for (const auto& p : f.participants)
                if (!std::binary_search(view.participants().begin(), view.participants().end(), p))
                    not_found->push_back("participant:" + p);
        if (!f.all_stimuli)
            for (const auto& s : f.stimuli)
                if (!view.find_stimulus(s))
                    not_found->push_back("stimulus:" + s);
    }
    std::vector<const SessionRecord*> out;
    for (const auto& r : view.sessions()) {
        if (!f.all_participants && !f.participants.count(r.key.participant_id))
            continue;
        if (!f.all_stimuli && !f.stimuli.count(r.key.stimulus_id))
            continue;
        out.push_back(&r);
    }
    return out;
}

std::vector<WordEyeFixation> restrict_to(std::span<const WordEyeFixation> entries, const std::vector<std::size_t>& ids)
{
    std::vector<WordEyeFixation> out;
    for (const auto& e : entries)
        if (std::binary_search(ids.begin(), ids.end(), e.word_id))
            out.push_back(e);
    return out;
}

json words_json(std::span<const WordEyeFixation> entries)
{
    json out = json::array();
    for (const auto& e : entries)
        out.push_back({{"word_id", e.word_id},
                       {"word", e.word},
                       {"char_start", e.char_start},
                       {"total_ms", e.total_ms},
                       {"first_seen_ms", e.first_seen_ms},
                       {"last_seen_ms", e.last_seen_ms}});
    return out;
}

json segments_json(std::span<const RenderSegment> segments)
{
    json out = json::array();
    for (const auto& s : segments) {
        if (s.kind == RenderSegment::Kind::Ellipsis) {
            out.push_back({{"hidden", s.hidden_count}});
            continue;
        }
        static constexpr const char* names[] = {"none", "scan", "heat"};
        json w{{"word_id", s.word_id}, {"total_ms", s.total_ms}, {"category", names[static_cast<int>(s.color.category)]}};
        if (s.color.category == ColorCategory::Heat)
            w["heat"] = s.color.heat;
        out.push_back(std::move(w));
    }
    return out;
}

/// Merged entries as per-word records of a pseudo participant, for metrics and rendering.
std::vector<WordEyeFixation> merged_as_words(const MergeResult& r, const std::string& stimulus)
{
    std::vector<WordEyeFixation> out;
    for (const auto& m : r.merged) {
        WordEyeFixation w{"*", stimulus, m.word_id, m.word, m.char_start, m.total_ms, 0.0, 0.0};
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<MergedPayload> merged_payloads(const WorkspaceView& view, const std::vector<const SessionRecord*>& selected,
                                           const QueryFilter& f, const ViewOptions& options)
{
    std::map<std::string, std::vector<const SessionRecord*>> by_stimulus;
    for (const SessionRecord* r : selected)
        by_stimulus[r->key.stimulus_id].push_back(r);
    std::vector<MergedPayload> out;
    for (auto& [stimulus, records] : by_stimulus) {
        MergedPayload m;
        m.stimulus_id = stimulus;
        std::set<std::string> visitors;
        for (const SessionRecord* r : records)
            visitors.insert(r->key.participant_id);
        m.visitors = visitors.size();

        std::vector<const SessionRecord*> processed;
        for (const SessionRecord* r : records)
            if (r->processed)
                processed.push_back(r);
        if (processed.empty()) {
            out.push_back(std::move(m));
            continue;
        }
        std::stable_sort(processed.begin(), processed.end(), [](const SessionRecord* a, const SessionRecord* b) {
            return a->first_ms < b->first_ms;
        });
        std::vector<std::pair<std::string, std::string>> seen;
        std::vector<MergeInput> inputs;
        for (const SessionRecord* r : processed) {
            seen.emplace_back(r->layout_hash, r->key.participant_id);
            inputs.push_back(MergeInput{r->key.participant_id, view.words(r->key), r->layout_hash});
        }
        m.base_layout = choose_base_layout(seen);
        const PageSnapshot* base = view.snapshot(m.base_layout);
        m.result = merge_sets(inputs, base, view.params().merge_radius);
        std::set<std::string> contributors;
        for (const auto& w : m.result.merged)
            for (const auto& [p, d] : w.per_participant)
                contributors.insert(p);
        m.contributors = contributors.size();

        const auto words = merged_as_words(m.result, stimulus);
        const auto aoi = words_in_aoi(*base, f.aoi_labels, f.aoi_mode);
        const auto shown = restrict_to(words, aoi);
        m.metrics = aoi_metrics(words, *base, f.aoi_labels, f.aoi_mode);
        m.segments = collapse_runs(*base, shown, options.hide_threshold, options.colors);
        if (!f.aoi_labels.empty()) {
            std::vector<MergedWordFixation> kept;
            for (auto& w : m.result.merged)
                if (std::binary_search(aoi.begin(), aoi.end(), w.word_id))
                    kept.push_back(std::move(w));
            m.result.merged = std::move(kept);
        }
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace

Dataset query(const WorkspaceView& view, const QueryFilter& filter, const ViewOptions& options)
{
    options.colors.validate();
    Dataset d;
    const auto selected = select_sessions(view, filter, &d.not_found);

    std::vector<SessionMetrics> metrics_rows;
    std::vector<SessionWords> word_rows;
    std::set<std::string> stimuli_seen;
    for (const SessionRecord* r : selected) {
        SessionPayload p;
        p.record = r;
        stimuli_seen.insert(r->key.stimulus_id);
        const PageSnapshot* snap = r->processed ? view.snapshot(r->layout_hash) : nullptr;
        if (!snap) {
            p.warnings.push_back("session has no snapshot and was not processed");
            p.metrics.labels.assign(filter.aoi_labels.begin(), filter.aoi_labels.end());
        } else {
            const auto& all = view.words(r->key);
            const auto aoi = words_in_aoi(*snap, filter.aoi_labels, filter.aoi_mode, &p.warnings);
            p.words = restrict_to(all, aoi);
            p.metrics = aoi_metrics(all, *snap, filter.aoi_labels, filter.aoi_mode);
            p.segments = collapse_runs(*snap, p.words, options.hide_threshold, options.colors);
        }
        metrics_rows.push_back(SessionMetrics{r->key, r->chronological_index, p.metrics});
        word_rows.push_back(SessionWords{r->key, r->chronological_index, p.words});
        d.sessions.push_back(std::move(p));
    }
    d.table = options.granularity == TableGranularity::Stimulus ? table_rows(metrics_rows, view.annotations())
                                                                : word_table_rows(word_rows, view.annotations());
    for (const auto& s : view.stimuli())
        if (stimuli_seen.count(s.stimulus_id) || (filter.all_stimuli ? filter.all_participants : filter.stimuli.count(s.stimulus_id)))
            d.stimuli.push_back(s);
    if (filter.merged)
        d.merged = merged_payloads(view, selected, filter, options);
    return d;
}

json Dataset::to_json(const WorkspaceView& view) const
{
    (void)view;
    json sessions_j = json::array();
    for (const auto& p : sessions) {
        const SessionRecord& r = *p.record;
        sessions_j.push_back({{"participant", r.key.participant_id},
                              {"stimulus", r.key.stimulus_id},
                              {"chronological_index", r.chronological_index},
                              {"processed", r.processed},
                              {"layout_hash", r.layout_hash},
                              {"visits", r.visits},
                              {"report", session_report_json(r.report)},
                              {"metrics", p.metrics.to_json()},
                              {"words", words_json(p.words)},
                              {"segments", segments_json(p.segments)},
                              {"warnings", p.warnings}});
    }
    json merged_j = json::array();
    for (const auto& m : merged) {
        json words = json::array();
        for (const auto& w : m.result.merged) {
            json per = json::object();
            for (const auto& [pid, dwell] : w.per_participant)
                per[pid] = {{"total_ms", dwell.total_ms},
                            {"first_seen_ms", dwell.first_seen_ms},
                            {"last_seen_ms", dwell.last_seen_ms}};
            words.push_back({{"word_id", w.word_id},
                             {"word", w.word},
                             {"char_start", w.char_start},
                             {"total_ms", w.total_ms},
                             {"contributors", w.contributors},
                             {"per_participant", per}});
        }
        json unmatched = json::array();
        for (const auto& u : m.result.unmatched)
            unmatched.push_back({{"participant", u.participant_id},
                                 {"word", u.entry.word},
                                 {"char_start", u.entry.char_start},
                                 {"total_ms", u.entry.total_ms}});
        merged_j.push_back({{"stimulus", m.stimulus_id},
                            {"base_layout", m.base_layout},
                            {"visitors", m.visitors},
                            {"contributors", m.contributors},
                            {"metrics", m.metrics.to_json()},
                            {"words", words},
                            {"unmatched", unmatched},
                            {"segments", segments_json(m.segments)}});
    }
    json stimuli_j = json::array();
    for (const auto& s : stimuli)
        stimuli_j.push_back({{"id", s.stimulus_id}, {"visitors", s.visitors}, {"layout_hashes", s.layout_hashes}});
    return {{"sessions", sessions_j},
            {"merged", merged_j},
            {"table", table.to_json()},
            {"not_found", not_found},
            {"stimuli", stimuli_j}};
}

std::string export_query_csv(const WorkspaceView& view, const QueryFilter& filter)
{
    const Dataset d = query(view, filter);
    if (filter.merged) {
        std::vector<WefCsvRow> rows;
        for (const auto& m : d.merged) {
            std::istringstream in(export_merged_csv(m.stimulus_id, m.result.merged));
            auto part = parse_wef_csv(in);
            rows.insert(rows.end(), part.begin(), part.end());
        }
        if (rows.empty())
            return export_merged_csv("", {});
        return export_rows_csv(rows);
    }
    std::vector<WordEyeFixation> all;
    for (const auto& p : d.sessions)
        all.insert(all.end(), p.words.begin(), p.words.end());
    return export_wef_csv(all);
}

std::map<std::string, AoiMetrics> engine_aoi_series(const WorkspaceView& view, const QueryFilter& filter,
                                                    bool by_participant)
{
    std::map<std::string, AoiMetrics> out;
    for (const SessionRecord* r : select_sessions(view, filter, nullptr)) {
        const PageSnapshot* snap = r->processed ? view.snapshot(r->layout_hash) : nullptr;
        if (!snap)
            continue;
        const AoiMetrics m = aoi_metrics(view.words(r->key), *snap, filter.aoi_labels, filter.aoi_mode);
        const std::string key = by_participant ? r->key.participant_id + "/" + r->key.stimulus_id : r->key.stimulus_id;
        auto [it, fresh] = out.try_emplace(key, m);
        if (!fresh) {
            AoiMetrics& acc = it->second;
            acc.fixation_time_ms += m.fixation_time_ms;
            acc.words_fixated += m.words_fixated;
            acc.chars_fixated += m.chars_fixated;
            acc.word_count_in_aoi += m.word_count_in_aoi;
            acc.percent_words_fixated = acc.word_count_in_aoi ? static_cast<double>(acc.words_fixated) /
                                                                    static_cast<double>(acc.word_count_in_aoi)
                                                              : 0.0;
        }
    }
    return out;
}

} // namespace wordgaze
