#pragma once

#include "wordgaze/snapshot.hpp"
#include "wordgaze/validation.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(WORDGAZE_FIXTURES) / name; }

inline wordgaze::PageSnapshot load_fixture(const std::string& name) { return wordgaze::load_snapshot_file(fixture(name)); }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("wordgaze_" + tag + "_" + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Writes page-relative samples as a gaze CSV with the canonical header.
inline void write_gaze_csv(const std::filesystem::path& path, const std::vector<wordgaze::GazeSample>& samples)
{
    std::ofstream out(path);
    out << "participant,stimulus,time_ms,x,y,valid\n";
    out.precision(17);
    for (const auto& s : samples)
        out << s.participant_id << ',' << s.stimulus_id << ',' << s.t_ms << ',' << s.x << ',' << s.y << ','
            << (s.valid ? 1 : 0) << '\n';
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Page-relative ingest config matching write_gaze_csv.
inline std::string page_config_json(double rate_hz = 250.0)
{
    return R"({"frame":{"kind":"PageRelative"},"sample_rate_hz":)" + std::to_string(rate_hz) + "}";
}

} // namespace testsupport
