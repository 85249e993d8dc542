#include "wordgaze/kernels.hpp"
#include "wordgaze/validation.hpp"

#include <omp.h>

#include <chrono>
#include <fstream>
#include <cstdio>
#include <random>

using namespace wordgaze;

namespace {

template <typename Fn>
double best_of(int reps, Fn fn)
{
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

PageSnapshot bench_page(std::size_t words, std::mt19937_64& rng)
{
    static const char* vocab[] = {"gaze", "word", "reading", "page", "text", "eye", "tracking", "fixation"};
    std::vector<TextBlock> blocks;
    std::string text;
    for (std::size_t i = 0; i < words; ++i) {
        if (!text.empty())
            text += ' ';
        text += vocab[rng() % 8];
        if ((i + 1) % 80 == 0) {
            blocks.push_back({text, {"body"}});
            text.clear();
        }
    }
    if (!text.empty())
        blocks.push_back({text, {"body"}});
    return synthesize_page("bench", blocks);
}

} // namespace

int main()
{
    std::mt19937_64 rng(11);
    std::printf("threads: %d\n", omp_get_max_threads());

    const PageSnapshot page = bench_page(10000, rng);
    const SpatialIndex index = build_index(page, 0.0);
    const auto rects = word_rects(page);
    double max_y = 0;
    for (const auto& r : rects)
        max_y = std::max(max_y, r.y1);
    std::uniform_real_distribution<double> ux(0, 1280), uy(0, max_y);
    std::vector<PagePoint> points(10000);
    for (auto& p : points)
        p = {ux(rng), uy(rng)};
    std::vector<PagePoint> many(1000000);
    for (auto& p : many)
        p = {ux(rng), uy(rng)};

    const double ref = best_of(3, [&] { hit_test_batch_reference(rects, points); });
    const double grid = best_of(3, [&] { hit_test_batch(index, points); });
    std::printf("hit test 10k boxes x 10k points: linear scan %.4f s, grid parallel %.4f s (%.0fx)\n", ref, grid,
                ref / grid);
    const double grid_many = best_of(3, [&] { hit_test_batch(index, many); });
    std::printf("hit test 10k boxes x 1M points: grid parallel %.4f s\n", grid_many);

    StudySpec spec;
    spec.participants = 8;
    spec.stimuli = 16;
    spec.stimuli_per_participant = 16;
    spec.samples_per_session = 5000;
    spec.words_per_page = 300;
    const auto dir = std::filesystem::temp_directory_path() / "wordgaze_bench_study";
    std::filesystem::remove_all(dir);
    const StudyFiles files = write_synthetic_study(dir, spec);
    IngestConfig cfg = IngestConfig::from_json(nlohmann::json::parse(std::ifstream(files.config)));
    std::ifstream in(files.gaze_csv);
    SessionMap sessions = sessionize(parse_gaze_csv(in, cfg), cfg);
    std::map<std::string, std::pair<PageSnapshot, SpatialIndex>> pages;
    for (const auto& e : std::filesystem::directory_iterator(files.snapshot_dir)) {
        PageSnapshot s = load_snapshot_file(e.path());
        SpatialIndex ix = build_index(s, 0.0);
        const std::string id = s.stimulus_id;
        pages.emplace(id, std::make_pair(std::move(s), std::move(ix)));
    }
    std::vector<SessionJob> jobs;
    for (const auto& [key, s] : sessions) {
        const auto& pg = pages.at(key.stimulus_id);
        jobs.push_back({&s, &pg.first, &pg.second});
    }
    const ProcessParams params;
    const double serial = best_of(3, [&] { process_sessions_reference(jobs, params); });
    const double parallel = best_of(3, [&] { process_sessions(jobs, params); });
    std::printf("process %zu sessions (%zu samples): serial %.4f s, parallel %.4f s (%.1fx)\n", jobs.size(),
                files.samples, serial, parallel, serial / parallel);
    std::filesystem::remove_all(dir);
    return 0;
}
