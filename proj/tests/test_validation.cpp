#include "oracles.hpp"
#include "support.hpp"
#include "wordgaze/error.hpp"
#include "wordgaze/validation.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace wordgaze;

TEST_CASE("pearson fixtures")
{
    const std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y, neg;
    for (double v : x) {
        y.push_back(2 * v + 1);
        neg.push_back(-v);
    }
    CHECK(std::abs(pearson(x, y) - 1.0) < 1e-9);
    CHECK(std::abs(pearson(x, neg) + 1.0) < 1e-9);
    const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4};
    CHECK(std::abs(pearson(a, b) - 0.8) < 1e-9);
    CHECK(std::abs(oracle::pearson(a, b) - 0.8) < 1e-12);
}

TEST_CASE("pearson errors")
{
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), Error);
    CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), ContractViolation);
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), ContractViolation);
}

TEST_CASE("pearson agrees with the textbook formula and is affine invariant")
{
    std::mt19937_64 rng(10);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(3 + rng() % 100), y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = n(rng) * 10;
            y[i] = 0.5 * x[i] + n(rng) * 5;
        }
        const double r = pearson(x, y);
        CHECK(std::abs(r - oracle::pearson(x, y)) < 1e-12);
        const double a = 0.01 + std::abs(n(rng)) * 5, b = n(rng) * 100;
        std::vector<double> ax(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            ax[i] = a * x[i] + b;
        CHECK(std::abs(pearson(ax, y) - r) < 1e-12);
        CHECK(std::abs(pearson(y, ax) - r) < 1e-12);
        CHECK(r <= 1.0);
        CHECK(r >= -1.0);
    }
}

TEST_CASE("summary stats")
{
    auto s = summary_stats(std::vector<double>{5, 5, 5});
    CHECK(s.max == 5);
    CHECK(s.mean == 5);
    CHECK(s.sd == 0);
    auto t = summary_stats(std::vector<double>{1, 3});
    CHECK(t.max == 3);
    CHECK(t.mean == 2);
    CHECK(t.sd == doctest::Approx(1.41421356).epsilon(1e-8));
    auto one = summary_stats(std::vector<double>{7});
    CHECK(one.sd == 0);
    CHECK(one.degenerate);
    CHECK_THROWS_AS(summary_stats(std::vector<double>{}), ContractViolation);
}

TEST_CASE("comparison against a scaled engine series")
{
    std::vector<ReferencePoint> ref;
    std::map<std::string, AoiMetrics> engine;
    std::mt19937_64 rng(2);
    for (int i = 0; i < 50; ++i) {
        const std::string id = "stim" + std::to_string(i);
        const double seconds = 1 + double(rng() % 100000) / 1000.0;
        ref.push_back({std::nullopt, id, seconds});
        AoiMetrics m;
        m.fixation_time_ms = seconds * 1000 * 0.83;
        engine[id] = m;
    }
    engine["extra"] = AoiMetrics{};
    ref.push_back({std::nullopt, "lonely", 3});
    const auto rep = compare_aoi_series(ref, engine);
    CHECK(rep.pearson_r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.stats_engine.mean < rep.stats_reference.mean);
    CHECK(rep.n_pairs == 50);
    CHECK(rep.keys.size() == rep.n_pairs);
    CHECK(std::is_sorted(rep.keys.begin(), rep.keys.end()));
    CHECK(rep.unmatched_reference == std::vector<std::string>{"lonely"});
    CHECK(rep.unmatched_engine == std::vector<std::string>{"extra"});

    const std::string table = format_comparison_table(rep, "Record", "Reference", "Engine");
    CHECK(table.find("Record") != std::string::npos);
    CHECK(table.find("Max") != std::string::npos);
    CHECK(table.find("Pearson") != std::string::npos);
}

TEST_CASE("identical series and swapped inputs")
{
    std::vector<ReferencePoint> ref{{std::nullopt, "a", 1}, {std::nullopt, "b", 4}, {std::nullopt, "c", 2.5}};
    std::map<std::string, AoiMetrics> engine;
    for (const auto& p : ref)
        engine[p.stimulus_id].fixation_time_ms = p.seconds * 1000;
    const auto rep = compare_aoi_series(ref, engine);
    CHECK(rep.pearson_r == doctest::Approx(1.0));
    CHECK(rep.stats_engine.mean == doctest::Approx(rep.stats_reference.mean));
    CHECK(rep.stats_engine.sd == doctest::Approx(rep.stats_reference.sd));

    std::map<std::string, AoiMetrics> other;
    other["a"].fixation_time_ms = 2000;
    other["b"].fixation_time_ms = 1000;
    other["c"].fixation_time_ms = 7000;
    const auto fwd = compare_aoi_series(ref, other);
    std::vector<ReferencePoint> swapped_ref;
    std::map<std::string, AoiMetrics> swapped_engine;
    for (const auto& [k, m] : other)
        swapped_ref.push_back({std::nullopt, k, m.fixation_time_ms / 1000});
    for (const auto& p : ref)
        swapped_engine[p.stimulus_id].fixation_time_ms = p.seconds * 1000;
    const auto back = compare_aoi_series(swapped_ref, swapped_engine);
    CHECK(back.pearson_r == doctest::Approx(fwd.pearson_r).epsilon(1e-12));
    CHECK(back.stats_reference.mean == doctest::Approx(fwd.stats_engine.mean));
    CHECK(back.stats_engine.sd == doctest::Approx(fwd.stats_reference.sd));
}

TEST_CASE("too few matched pairs is an error")
{
    std::vector<ReferencePoint> ref{{std::nullopt, "a", 1}, {std::nullopt, "b", 2}};
    std::map<std::string, AoiMetrics> engine;
    engine["a"].fixation_time_ms = 1;
    CHECK_THROWS_AS(compare_aoi_series(ref, engine), Error);
}

TEST_CASE("reference CSV parsing")
{
    std::istringstream plain("stimulus_id,seconds\ns1,1.5\ns2,3\n");
    const auto p = parse_reference_csv(plain);
    REQUIRE(p.size() == 2);
    CHECK(reference_key(p[0]) == "s1");
    std::istringstream keyed("participant,stimulus_id,seconds\np1,s1,1.5\n");
    const auto k = parse_reference_csv(keyed);
    CHECK(reference_key(k[0]) == "p1/s1");
}

TEST_CASE("trace generator: 200 ms at 250 Hz gives 50 samples over the word")
{
    const auto snap = testsupport::load_fixture("hello_world.json");
    std::vector<PlannedDwell> plan{{0, 200}};
    const auto trace = generate_reading_trace(snap, plan, RecordingMeta{250});
    REQUIRE(trace.size() == 50);
    for (const auto& s : trace) {
        CHECK(s.x == 35);
        CHECK(s.y == 20);
    }
    CHECK(generate_reading_trace(snap, {}, RecordingMeta{}).empty());
    std::vector<PlannedDwell> too_short{{0, 3}};
    CHECK_THROWS(generate_reading_trace(snap, too_short, RecordingMeta{250}));
    std::vector<PlannedDwell> missing{{5, 200}};
    CHECK_THROWS(generate_reading_trace(snap, missing, RecordingMeta{250}));
}

TEST_CASE("jittered traces stay inside the planned boxes")
{
    const auto snap = testsupport::load_fixture("record_page.json");
    std::vector<PlannedDwell> plan;
    for (std::size_t i = 0; i < snap.words.size(); i += 2)
        plan.push_back({i, 160});
    TraceOptions opt;
    opt.jitter_px = 3;
    opt.seed = 99;
    const auto trace = generate_reading_trace(snap, plan, RecordingMeta{250}, opt);
    const auto rects = word_rects(snap);
    std::size_t on_words = 0;
    for (const auto& s : trace)
        for (const auto& r : rects)
            if (r.contains({s.x, s.y})) {
                ++on_words;
                break;
            }
    CHECK(on_words == 40 * plan.size());
}

TEST_CASE("region plans cover the quantized total")
{
    const std::vector<std::size_t> ids{3, 4, 5, 6, 7, 8, 9, 10};
    for (double total : {2562.4, 2318.6, 723.4, 120.0, 5240.8}) {
        const auto plan = plan_region_dwell(ids, total, 4.0);
        double sum = 0;
        for (const auto& p : plan) {
            sum += p.dwell_ms;
            CHECK(p.dwell_ms >= 100);
        }
        CHECK(std::abs(sum - total) <= 2.0);
    }
}

TEST_CASE("synthetic study writes exactly the requested samples")
{
    testsupport::TempDir dir("synth");
    StudySpec spec;
    spec.participants = 3;
    spec.stimuli = 5;
    spec.stimuli_per_participant = 4;
    spec.samples_per_session = 777;
    const auto files = write_synthetic_study(dir.path(), spec);
    CHECK(files.sessions == 12);
    CHECK(files.samples == 12 * 777);
    std::size_t lines = 0;
    std::istringstream in(testsupport::read_text(files.gaze_csv));
    for (std::string line; std::getline(in, line);)
        ++lines;
    CHECK(lines == 12 * 777 + 1);
    std::size_t snapshots = 0;
    for (const auto& e : std::filesystem::directory_iterator(files.snapshot_dir))
        snapshots += e.path().extension() == ".json";
    CHECK(snapshots == 5);
}
