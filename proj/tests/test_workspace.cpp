#include "study_fixture.hpp"
#include "wordgaze/error.hpp"
#include "wordgaze/workspace.hpp"

#include <doctest.h>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

using namespace wordgaze;
using testsupport::read_text;
using testsupport::TempDir;

namespace {

std::map<std::string, std::string> tree_bytes(const std::filesystem::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() != ".lock")
            out[std::filesystem::relative(e.path(), root).string()] = read_text(e.path());
    return out;
}

QueryFilter only(std::set<std::string> participants, std::set<std::string> stimuli)
{
    QueryFilter f;
    f.all_participants = participants.empty();
    f.participants = std::move(participants);
    f.all_stimuli = stimuli.empty();
    f.stimuli = std::move(stimuli);
    return f;
}

} // namespace

TEST_CASE("fresh import processes every session and lists the stored artifacts")
{
    TempDir dir("ws_import");
    testsupport::SmallStudy study(dir.path());
    Workspace ws(dir / "ws");
    const auto summary = ws.import(study.request());
    CHECK(summary.changed);
    CHECK(summary.sessions == 3);
    CHECK(summary.processed_sessions == 3);
    CHECK(summary.new_snapshots == 2);

    const auto m = ws.manifest();
    CHECK(m.at("participants") == nlohmann::json{"p01", "p02"});
    std::set<std::string> listed;
    for (const auto& in : m.at("inputs")) {
        listed.insert(in.at("gaze").get<std::string>());
        listed.insert(in.at("config").get<std::string>());
    }
    for (const auto& [hash, info] : m.at("snapshots").items())
        listed.insert(info.at("file").get<std::string>());
    for (const auto& s : m.at("sessions")) {
        CHECK(s.at("processed").get<bool>());
        CHECK(s.at("params") == ProcessParams{}.to_json());
        listed.insert(s.at("derived").get<std::string>());
    }
    listed.insert(m.at("annotations").get<std::string>());
    listed.insert("manifest.json");
    std::set<std::string> stored;
    for (const auto& [path, bytes] : tree_bytes(ws.root()))
        stored.insert(path);
    CHECK(stored == listed);
}

TEST_CASE("identical re-import is a no-op")
{
    TempDir dir("ws_reimport");
    testsupport::SmallStudy study(dir.path());
    Workspace ws(dir / "ws");
    ws.import(study.request());
    const auto before = tree_bytes(ws.root());
    const auto again = ws.import(study.request());
    CHECK_FALSE(again.changed);
    CHECK(tree_bytes(ws.root()) == before);
}

TEST_CASE("sessions without a snapshot are stored unprocessed")
{
    TempDir dir("ws_nosnap");
    testsupport::SmallStudy study(dir.path());
    auto req = study.request();
    req.snapshot_files = {testsupport::fixture("record_page.json")};
    Workspace ws(dir / "ws");
    const auto s = ws.import(req);
    CHECK(s.sessions == 3);
    CHECK(s.processed_sessions == 2);
    CHECK_FALSE(s.warnings.empty());
    const auto view = WorkspaceView::load(ws.root());
    const auto* hello = view.find_session({"p01", "hello"});
    REQUIRE(hello);
    CHECK_FALSE(hello->processed);

    // Supplying the snapshot later processes the stored session.
    ImportRequest more;
    more.snapshot_files = {testsupport::fixture("hello_world.json")};
    CHECK(ws.import(more).processed_sessions == 3);
}

TEST_CASE("a rejected import leaves the workspace untouched")
{
    TempDir dir("ws_reject");
    testsupport::SmallStudy study(dir.path());
    Workspace ws(dir / "ws");
    ws.import(study.request());
    const auto before = tree_bytes(ws.root());

    auto doc = nlohmann::json::parse(read_text(testsupport::fixture("hello_world.json")));
    doc["schema_version"] = 2;
    doc["stimulus_id"] = "newer";
    testsupport::write_text(dir / "newer.json", doc.dump());
    std::vector<GazeSample> extra;
    testsupport::append_trace(extra, testsupport::load_fixture("hello_world.json"), {{0, 200}}, "p03", 0);
    testsupport::write_gaze_csv(dir / "extra.csv", extra);

    ImportRequest bad;
    bad.gaze_files = {dir / "extra.csv"};
    bad.snapshot_files = {dir / "newer.json"};
    bad.config = study.config;
    CHECK_THROWS_AS(ws.import(bad), ValidationError);
    CHECK(tree_bytes(ws.root()) == before);

    testsupport::write_text(dir / "broken.csv", "participant,stimulus,time_ms,x\n");
    ImportRequest broken;
    broken.gaze_files = {dir / "broken.csv"};
    CHECK_THROWS_AS(ws.import(broken), ConfigError);
    CHECK(tree_bytes(ws.root()) == before);
}

TEST_CASE("writers are exclusive")
{
    TempDir dir("ws_lock");
    testsupport::SmallStudy study(dir.path());
    Workspace ws(dir / "ws");
    const int fd = ::open((ws.root() / ".lock").c_str(), O_RDWR | O_CREAT, 0644);
    REQUIRE(fd >= 0);
    REQUIRE(::flock(fd, LOCK_EX) == 0);
    CHECK_THROWS_AS(ws.import(study.request()), Error);
    ::flock(fd, LOCK_UN);
    ::close(fd);
    CHECK(ws.import(study.request()).changed);
}

TEST_CASE("re-processing records provenance and is byte-stable")
{
    TempDir dir("ws_process");
    testsupport::SmallStudy study(dir.path());
    Workspace ws(dir / "ws");
    ws.import(study.request());

    ProcessParams p;
    p.idt.dispersion_threshold_px = 30;
    p.idt.min_duration_ms = 100;
    p.slop_px = 4;
    p.dwell_mode = DwellMode::Centroid;
    p.merge_radius = 40;
    ws.process(p);
    const auto first = tree_bytes(ws.root());
    for (const auto& s : ws.manifest().at("sessions")) {
        CHECK(s.at("params") == p.to_json());
        const auto store = nlohmann::json::parse(read_text(ws.root() / s.at("derived").get<std::string>()));
        CHECK(store.at("params") == p.to_json());
    }
    CHECK(ws.params() == p);
    ws.process(p);
    CHECK(tree_bytes(ws.root()) == first);

    ws.process(ProcessParams{});
    CHECK(tree_bytes(ws.root()) != first);
    ws.process(p);
    CHECK(tree_bytes(ws.root()) == first);
}

TEST_CASE("query payloads, ordering and not-found ids")
{
    TempDir dir("ws_query");
    testsupport::SmallStudy study(dir.path());
    Workspace ws(dir / "ws");
    ws.import(study.request());
    const auto view = WorkspaceView::load(ws.root());

    const auto one = query(view, only({"p01"}, {"record0042"}));
    REQUIRE(one.sessions.size() == 1);
    CHECK(one.sessions[0].record->key == SessionKey{"p01", "record0042"});
    CHECK(one.not_found.empty());

    const auto all = query(view, QueryFilter{});
    REQUIRE(all.sessions.size() == 3);
    CHECK(all.sessions[0].record->key.stimulus_id == "hello");
    CHECK(all.sessions[1].record->key.stimulus_id == "record0042");
    CHECK(all.sessions[1].record->chronological_index == 1);
    CHECK(all.table.rows.size() == 3);

    const auto missing = query(view, only({"p01", "ghost"}, {"nowhere"}));
    CHECK(missing.not_found == std::vector<std::string>{"participant:ghost", "stimulus:nowhere"});
    CHECK(missing.sessions.empty());

    QueryFilter title = only({}, {"record0042"});
    title.aoi_labels = {"title"};
    const auto t = query(view, title);
    for (const auto& s : t.sessions) {
        CHECK(s.metrics.word_count_in_aoi == 8);
        for (const auto& w : s.words)
            CHECK(w.word_id < 8);
    }
}

TEST_CASE("narrowing a filter never adds sessions")
{
    TempDir dir("ws_monotone");
    testsupport::NewsStudy study(dir.path());
    Workspace ws(dir / "ws");
    ws.import(study.request());
    const auto view = WorkspaceView::load(ws.root());
    std::vector<std::set<std::string>> ps{{}, {"s1", "s2", "s7"}, {"s2"}}, ss{{}, {"news23432769", "record0042"}, {"record0042"}};
    std::vector<std::set<SessionKey>> results;
    for (const auto& p : ps)
        for (const auto& s : ss) {
            std::set<SessionKey> keys;
            for (const auto& payload : query(view, only(p, s)).sessions)
                keys.insert(payload.record->key);
            results.push_back(keys);
        }
    for (std::size_t pi = 0; pi < ps.size(); ++pi)
        for (std::size_t si = 0; si < ss.size(); ++si) {
            const auto& cur = results[pi * ss.size() + si];
            if (pi + 1 < ps.size())
                CHECK(std::includes(cur.begin(), cur.end(), results[(pi + 1) * ss.size() + si].begin(),
                                    results[(pi + 1) * ss.size() + si].end()));
            if (si + 1 < ss.size())
                CHECK(std::includes(cur.begin(), cur.end(), results[pi * ss.size() + si + 1].begin(),
                                    results[pi * ss.size() + si + 1].end()));
        }
}

TEST_CASE("merged view of a page seen by 6 of 9 participants")
{
    TempDir dir("ws_merged");
    testsupport::NewsStudy study(dir.path());
    Workspace ws(dir / "ws");
    const auto summary = ws.import(study.request());
    CHECK(summary.processed_sessions == 15);
    const auto view = WorkspaceView::load(ws.root());
    CHECK(view.participants().size() == 9);
    const auto* info = view.find_stimulus("news23432769");
    REQUIRE(info);
    CHECK(info->visitors == 6);
    CHECK(info->layout_hashes.size() == 2);

    QueryFilter f = only({}, {"news23432769"});
    f.merged = true;
    const auto d = query(view, f);
    REQUIRE(d.merged.size() == 1);
    const auto& m = d.merged[0];
    CHECK(m.contributors == 6);
    CHECK(m.visitors == 6);
    CHECK(m.base_layout == testsupport::load_fixture("news_page.json").layout_hash);

    double individual = 0;
    for (const auto& s : d.sessions)
        for (const auto& w : s.words)
            individual += w.total_ms;
    CHECK(merged_total_ms(m.result) == doctest::Approx(individual).epsilon(1e-12));
}

TEST_CASE("export of a query matches the per-session entries")
{
    TempDir dir("ws_export");
    testsupport::SmallStudy study(dir.path());
    Workspace ws(dir / "ws");
    ws.import(study.request());
    const auto view = WorkspaceView::load(ws.root());
    const auto csv = export_query_csv(view, only({"p02"}, {}));
    CHECK(csv == export_wef_csv(view.words({"p02", "record0042"})));
    QueryFilter merged = only({}, {"record0042"});
    merged.merged = true;
    const auto mcsv = export_query_csv(view, merged);
    CHECK(mcsv.find("contributors,per_participant") != std::string::npos);
    CHECK(mcsv.find("p01=") != std::string::npos);
}
