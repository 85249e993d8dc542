#include "oracles.hpp"
#include "wordgaze/error.hpp"
#include "wordgaze/fixation.hpp"

#include <doctest.h>

#include <random>

using namespace wordgaze;

namespace {

std::vector<TimedPoint> cluster_trace(std::mt19937_64& rng, std::size_t n)
{
    std::vector<TimedPoint> pts;
    std::uniform_real_distribution<double> pos(0, 1200), jit(-8, 8);
    double cx = pos(rng), cy = pos(rng), t = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (rng() % 20 == 0) {
            cx = pos(rng);
            cy = pos(rng);
        }
        t += (rng() % 8 == 0) ? 8.0 : 4.0;
        pts.push_back({t, cx + jit(rng), cy + jit(rng)});
    }
    return pts;
}

std::size_t fixation_samples(const IdtResult& r)
{
    std::size_t n = 0;
    for (const auto& l : r.labels)
        n += !l.is_saccade();
    return n;
}

} // namespace

TEST_CASE("dispersion examples")
{
    CHECK(dispersion(std::vector<PagePoint>{{5, 5}}) == 0);
    CHECK(dispersion(std::vector<PagePoint>{{0, 0}, {3, 4}}) == 7);
    CHECK(dispersion(std::vector<PagePoint>{{0, 0}, {1, 9}, {2, 1}}) == 11);
    CHECK_THROWS_AS(dispersion(std::vector<PagePoint>{}), ContractViolation);
}

TEST_CASE("empty run gives no fixations")
{
    auto r = detect_fixations_idt(std::vector<TimedPoint>{}, IdtParams{});
    CHECK(r.fixations.empty());
    CHECK(r.labels.empty());
}

TEST_CASE("stationary 25 samples at 4 ms form one fixation")
{
    std::vector<TimedPoint> pts;
    for (int i = 0; i < 25; ++i)
        pts.push_back({i * 4.0, 100, 100});
    auto r = detect_fixations_idt(pts, IdtParams{42, 80});
    REQUIRE(r.fixations.size() == 1);
    CHECK(r.fixations[0].begin == 0);
    CHECK(r.fixations[0].end == 25);
    CHECK(r.fixations[0].centroid_x == 100);
    CHECK(r.fixations[0].centroid_y == 100);
    CHECK(r.fixations[0].end_ms == 96);
}

TEST_CASE("run shorter than the minimum duration is all saccade")
{
    std::vector<TimedPoint> pts;
    for (int i = 0; i < 10; ++i)
        pts.push_back({i * 4.0, 100, 100});
    auto r = detect_fixations_idt(pts, IdtParams{42, 80});
    CHECK(r.fixations.empty());
    CHECK(fixation_samples(r) == 0);
}

TEST_CASE("three clusters separated by jumps match the brute-force oracle")
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> jit(-5, 5);
    std::vector<TimedPoint> pts;
    double t = 0;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 40; ++i, t += 4)
            pts.push_back({t, 100 + 300.0 * c + jit(rng), 200 + jit(rng)});
    auto r = detect_fixations_idt(pts, IdtParams{42, 80});
    const auto expect = oracle::idt(pts, 42, 80);
    REQUIRE(r.fixations.size() == 3);
    REQUIRE(expect.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(r.fixations[k].begin == expect[k].begin);
        CHECK(r.fixations[k].end == expect[k].end);
    }
}

TEST_CASE("randomized traces agree with the oracle and satisfy the fixation invariants")
{
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const IdtParams p{10.0 + static_cast<double>(rng() % 60), 40.0 + static_cast<double>(rng() % 100)};
        const auto pts = cluster_trace(rng, 1 + rng() % 400);
        const auto r = detect_fixations_idt(pts, p);
        const auto expect = oracle::idt(pts, p.dispersion_threshold_px, p.min_duration_ms);
        REQUIRE(r.fixations.size() == expect.size());
        std::vector<std::int32_t> got(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i)
            got[i] = r.labels[i].fixation;
        CHECK(got == oracle::labels(expect, pts.size()));

        std::size_t prev_end = 0;
        for (const auto& f : r.fixations) {
            CHECK(f.begin >= prev_end);
            prev_end = f.end;
            CHECK(f.end_ms - f.start_ms >= p.min_duration_ms);
            CHECK(oracle::spread(pts, f.begin, f.end - 1) <= p.dispersion_threshold_px);
        }
        CHECK(r.labels.size() == pts.size());
        const auto again = detect_fixations_idt(pts, p);
        CHECK(again.fixations == r.fixations);
    }
}

TEST_CASE("raising the dispersion threshold never reduces fixation samples")
{
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const auto pts = cluster_trace(rng, 300);
        std::size_t prev = 0;
        for (double thr : {5.0, 10.0, 20.0, 42.0, 80.0, 200.0, 5000.0}) {
            const std::size_t n = fixation_samples(detect_fixations_idt(pts, IdtParams{thr, 80}));
            CHECK(n >= prev);
            prev = n;
        }
    }
}

TEST_CASE("unusable samples and long gaps split the session into runs")
{
    std::vector<TimedPoint> pts;
    for (int i = 0; i < 60; ++i)
        pts.push_back({i * 4.0, 100, 100});
    std::vector<std::uint8_t> usable(60, 1);
    usable[30] = 0;
    auto r = detect_session_fixations(pts, usable, IdtParams{42, 80}, 1000);
    REQUIRE(r.fixations.size() == 2);
    CHECK(r.fixations[0].end == 30);
    CHECK(r.fixations[1].begin == 31);
    CHECK(r.labels[30].is_saccade());

    std::vector<TimedPoint> gap = pts;
    for (int i = 30; i < 60; ++i)
        gap[i].t_ms += 5000;
    auto g = detect_session_fixations(gap, std::vector<std::uint8_t>(60, 1), IdtParams{42, 80}, 1000);
    CHECK(g.fixations.size() == 2);
}

TEST_CASE("parameters must be positive")
{
    CHECK_THROWS_AS(IdtParams({0, 80}).validate(), ContractViolation);
    CHECK_THROWS_AS(IdtParams({42, -1}).validate(), ContractViolation);
}
