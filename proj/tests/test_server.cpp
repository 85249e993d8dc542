#include "study_fixture.hpp"
#include "wordgaze/error.hpp"
#include "wordgaze/server.hpp"

#include <doctest.h>
#include <httplib.h>

#include <future>
#include <thread>

using namespace wordgaze;

namespace {

struct RunningServer {
    testsupport::TempDir dir{"server"};
    std::shared_ptr<const WorkspaceView> view;
    std::unique_ptr<QueryServer> server;
    std::thread thread;
    int port = 0;

    RunningServer()
    {
        testsupport::SmallStudy study(dir.path());
        Workspace ws(dir / "ws");
        ws.import(study.request());
        view = std::make_shared<const WorkspaceView>(WorkspaceView::load(ws.root()));
        server = std::make_unique<QueryServer>(view);
        port = server->bind("127.0.0.1", 0);
        thread = std::thread([this] { server->listen(); });
    }
    ~RunningServer()
    {
        server->stop();
        thread.join();
    }
    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_connection_timeout(5);
        c.set_read_timeout(10);
        return c;
    }
};

nlohmann::json get_json(httplib::Client& c, const std::string& path, int expect = 200)
{
    auto res = c.Get(path);
    REQUIRE(res);
    CHECK(res->status == expect);
    return nlohmann::json::parse(res->body);
}

} // namespace

TEST_CASE("http query api")
{
    RunningServer srv;
    auto c = srv.client();

    SUBCASE("participants of the fixture workspace")
    {
        CHECK(get_json(c, "/api/participants").at("participants") == nlohmann::json{"p01", "p02"});
    }
    SUBCASE("stimuli per participant in chronological order")
    {
        const auto j = get_json(c, "/api/stimuli?participant=p01");
        REQUIRE(j.at("stimuli").size() == 2);
        CHECK(j["stimuli"][0]["stimulus"] == "hello");
        CHECK(j["stimuli"][1]["chronological_index"] == 1);
        const auto all = get_json(c, "/api/stimuli");
        CHECK(all.at("stimuli").size() == 2);
    }
    SUBCASE("session payload restricted to an AOI")
    {
        const auto j = get_json(c, "/api/session?participant=p01&stimulus=record0042&aoi=title");
        CHECK(j.at("metrics").at("word_count_in_aoi") == 8);
        CHECK_FALSE(j.at("segments").empty());
        get_json(c, "/api/session?participant=p09&stimulus=record0042", 404);
    }
    SUBCASE("malformed parameters are rejected and the service keeps running")
    {
        const auto bad = get_json(c, "/api/table?hide=abc", 400);
        CHECK(bad.at("error").get<std::string>().find("hide") != std::string::npos);
        get_json(c, "/api/table?aoi_mode=sometimes", 400);
        get_json(c, "/api/table?heat_min=900", 400);
        get_json(c, "/api/table?frobnicate=1", 400);
        get_json(c, "/api/session?participant=p01", 400);
        CHECK(get_json(c, "/api/participants").at("participants").size() == 2);
    }
    SUBCASE("merged view and labels")
    {
        const auto m = get_json(c, "/api/merged?stimulus=record0042");
        CHECK(m.at("contributors") == 2);
        CHECK(m.at("visitors") == 2);
        const auto l = get_json(c, "/api/labels?stimulus=record0042");
        CHECK(l.at("labels").size() >= 7);
        get_json(c, "/api/merged?stimulus=nothing", 404);
    }
    SUBCASE("table sorting and config defaults")
    {
        const auto t = get_json(c, "/api/table?sort_by=fixation_time_ms&descending=true");
        CHECK(t.at("table").at("rows").size() == 3);
        get_json(c, "/api/table?sort_by=nope", 400);
        const auto cfg = get_json(c, "/api/config");
        CHECK(cfg.at("colors").at("heat_max_ms") == 800.0);
    }
    SUBCASE("export matches the engine export")
    {
        auto res = c.Get("/api/export.csv?participant=p02");
        REQUIRE(res);
        CHECK(res->status == 200);
        QueryFilter f;
        f.all_participants = false;
        f.participants = {"p02"};
        CHECK(res->body == export_query_csv(*srv.view, f));
    }
    SUBCASE("no endpoint accepts writes")
    {
        auto res = c.Post("/api/participants", "", "application/json");
        REQUIRE(res);
        CHECK(res->status >= 400);
    }
}

TEST_CASE("100 concurrent identical queries return identical payloads")
{
    RunningServer srv;
    const std::string path = "/api/table?aoi=abstract&granularity=word";
    std::vector<std::future<std::string>> futures;
    for (int i = 0; i < 100; ++i)
        futures.push_back(std::async(std::launch::async, [&] {
            auto c = srv.client();
            auto res = c.Get(path);
            return res && res->status == 200 ? res->body : std::string("failed");
        }));
    std::set<std::string> bodies;
    for (auto& f : futures)
        bodies.insert(f.get());
    CHECK(bodies.size() == 1);
    CHECK(*bodies.begin() != "failed");
}

TEST_CASE("binding a port in use fails at startup")
{
    RunningServer srv;
    QueryServer other(srv.view);
    CHECK_THROWS_AS(other.bind("127.0.0.1", srv.port), wordgaze::Error);
}
