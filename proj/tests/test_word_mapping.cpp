#include "oracles.hpp"
#include "support.hpp"
#include "wordgaze/kernels.hpp"
#include "wordgaze/word_mapping.hpp"

#include <doctest.h>

#include <random>

using namespace wordgaze;

namespace {

PageSnapshot one_word_page()
{
    return load_snapshot(nlohmann::json::parse(R"({"schema_version":1,"stimulus_id":"m","url":"","page_text":"methane",
        "viewport_width_px":1280,"words":[{"word_id":0,"text":"methane","char_start":0,"char_end":7,
        "x":10,"y":10,"w":40,"h":10,"dom_path":"p","labels":[]}]})"));
}

std::vector<Rect> random_boxes(std::mt19937_64& rng, std::size_t n, double extent)
{
    std::uniform_real_distribution<double> pos(0, extent), size(1, 60);
    std::vector<Rect> boxes;
    for (std::size_t i = 0; i < n; ++i) {
        // Snap to a coarse grid so shared edges and identical boxes occur.
        const double x = std::floor(pos(rng) / 4) * 4, y = std::floor(pos(rng) / 4) * 4;
        const double w = std::floor(size(rng) / 2) * 2 + 2, h = std::floor(size(rng) / 2) * 2 + 2;
        boxes.push_back({x, y, x + w, y + h});
    }
    return boxes;
}

} // namespace

TEST_CASE("empty index hits nothing")
{
    SpatialIndex index(std::vector<Rect>{}, 0);
    CHECK_FALSE(index.hit_test({0, 0}));
    CHECK_FALSE(index.hit_test({100, 100}));
}

TEST_CASE("single box hit and miss")
{
    SpatialIndex index(std::vector<Rect>{{10, 10, 60, 30}}, 0);
    CHECK(index.hit_test({30, 20}) == std::optional<std::size_t>(0));
    CHECK_FALSE(index.hit_test({5, 5}));
    CHECK(index.hit_test({10, 10}) == std::optional<std::size_t>(0));
    CHECK(index.hit_test({60, 30}) == std::optional<std::size_t>(0));
}

TEST_CASE("shared edges and nested boxes go to the smallest word id")
{
    SpatialIndex adjacent(std::vector<Rect>{{0, 0, 10, 10}, {10, 0, 20, 10}}, 0);
    CHECK(adjacent.hit_test({10, 5}) == std::optional<std::size_t>(0));
    SpatialIndex nested(std::vector<Rect>{{40, 40, 50, 50}, {0, 0, 100, 100}, {45, 45, 46, 46}}, 0);
    CHECK(nested.hit_test({45.5, 45.5}) == std::optional<std::size_t>(0));
    CHECK(nested.hit_test({20, 20}) == std::optional<std::size_t>(1));
}

TEST_CASE("slop expands every box")
{
    SpatialIndex index(std::vector<Rect>{{10, 10, 60, 30}}, 4);
    CHECK(index.hit_test({6, 6}) == std::optional<std::size_t>(0));
    CHECK_FALSE(index.hit_test({5.9, 20}));
}

TEST_CASE("margin whitespace on a fixture page maps to no word")
{
    const auto snap = testsupport::load_fixture("record_page.json");
    const auto index = build_index(snap);
    CHECK_FALSE(hit_test(index, {5, 5}));
    CHECK_FALSE(hit_test(index, {1270, 60}));
    const auto& w = snap.words[3];
    CHECK(hit_test(index, {w.x + w.w / 2, w.y + w.h / 2}) == std::optional<std::size_t>(3));
}

TEST_CASE("index agrees with a linear scan on random geometry")
{
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const double extent = trial % 2 ? 2000 : 300;
        const auto boxes = random_boxes(rng, 1 + rng() % 2000, extent);
        const double slop = static_cast<double>(rng() % 3) * 2;
        SpatialIndex index(boxes, slop);
        std::uniform_real_distribution<double> q(-20, extent + 80);
        for (int i = 0; i < 2000; ++i) {
            PagePoint p{q(rng), q(rng)};
            if (i % 3 == 0) {
                const auto& b = boxes[rng() % boxes.size()];
                p = {i % 2 ? b.x0 : b.x1, b.y0}; // exact corners exercise tie-breaks
            }
            CHECK(index.hit_test(p) == oracle::hit(boxes, slop, p));
        }
    }
}

TEST_CASE("batch kernels agree with the oracle")
{
    std::mt19937_64 rng(8);
    const auto boxes = random_boxes(rng, 3000, 1500);
    SpatialIndex index(boxes, 0);
    std::uniform_real_distribution<double> q(0, 1600);
    std::vector<PagePoint> pts(5000);
    for (auto& p : pts)
        p = {q(rng), q(rng)};
    const auto fast = hit_test_batch(index, pts);
    const auto slow = hit_test_batch_reference(boxes, pts);
    REQUIRE(fast.size() == pts.size());
    CHECK(fast == slow);
    for (std::size_t i = 0; i < pts.size(); i += 7) {
        const auto o = oracle::hit(boxes, 0, pts[i]);
        CHECK(fast[i] == (o ? static_cast<std::int64_t>(*o) : no_word));
    }
}

TEST_CASE("thirty samples over one word accumulate 120 ms")
{
    const auto snap = one_word_page();
    const auto index = build_index(snap);
    std::vector<TimedPoint> pts;
    for (int i = 0; i < 30; ++i)
        pts.push_back({i * 4.0, 30, 15});
    const auto idt = detect_fixations_idt(pts, IdtParams{});
    const auto wef = accumulate({"p", "m"}, pts, idt, index, snap, RecordingMeta{250});
    REQUIRE(wef.size() == 1);
    double independent = 0;
    for (int i = 0; i + 1 < 30; ++i)
        independent += pts[i + 1].t_ms - pts[i].t_ms;
    independent += 1000.0 / 250;
    CHECK(wef[0].total_ms == 120);
    CHECK(wef[0].total_ms == independent);
    CHECK(wef[0].first_seen_ms == 0);
    CHECK(wef[0].last_seen_ms == 116);
    CHECK(wef[0].word == "methane");
    CHECK(wef[0].char_start == 0);
}

TEST_CASE("saccade-only samples credit nothing")
{
    const auto snap = one_word_page();
    const auto index = build_index(snap);
    std::vector<TimedPoint> pts;
    for (int i = 0; i < 30; ++i)
        pts.push_back({i * 4.0, i % 2 ? 30.0 : 900.0, 15});
    const auto idt = detect_fixations_idt(pts, IdtParams{});
    CHECK(idt.fixations.empty());
    CHECK(accumulate({"p", "m"}, pts, idt, index, snap, RecordingMeta{}).empty());
}

TEST_CASE("whitespace samples inside a fixation keep the sum below the fixation dwell")
{
    const auto snap = one_word_page();
    const auto index = build_index(snap);
    std::vector<TimedPoint> pts;
    for (int i = 0; i < 40; ++i)
        pts.push_back({i * 4.0, i < 20 ? 30.0 : 55.0, 15}); // right half is past the box edge
    const auto idt = detect_fixations_idt(pts, IdtParams{});
    REQUIRE(idt.fixations.size() == 1);
    const auto wef = accumulate({"p", "m"}, pts, idt, index, snap, RecordingMeta{});
    REQUIRE(wef.size() == 1);
    CHECK(wef[0].total_ms == 80);
    CHECK(wef[0].total_ms < dwell_span_ms(idt.fixations[0], 4));
}

TEST_CASE("centroid mode credits the whole span to the centroid word")
{
    const auto snap = one_word_page();
    const auto index = build_index(snap);
    std::vector<TimedPoint> pts;
    for (int i = 0; i < 40; ++i)
        pts.push_back({i * 4.0, i < 30 ? 40.0 : 55.0, 15});
    const auto idt = detect_fixations_idt(pts, IdtParams{});
    const auto wef = accumulate({"p", "m"}, pts, idt, index, snap, RecordingMeta{}, DwellMode::Centroid);
    REQUIRE(wef.size() == 1);
    CHECK(wef[0].total_ms == 160);
}

TEST_CASE("word store file round trip")
{
    WefStore s{{"p1", "s1"}, "abc", nlohmann::json{{"slop_px", 0}}, {{"p1", "s1", 3, "wörd", 17, 120.5, 4, 96}}};
    const auto back = wef_store_from_json(wef_store_to_json(s));
    CHECK(back.key == s.key);
    CHECK(back.layout_hash == "abc");
    CHECK(back.entries == s.entries);
    CHECK(back.params == s.params);
}
