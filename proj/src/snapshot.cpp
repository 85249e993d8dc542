#include "wordgaze/snapshot.hpp"
#include "wordgaze/digest.hpp"
#include "wordgaze/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace wordgaze {

namespace utf8 {

std::vector<std::size_t> code_point_offsets(std::string_view text)
{
    std::vector<std::size_t> out;
    out.reserve(text.size() + 1);
    for (std::size_t i = 0; i < text.size(); ++i)
        if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80)
            out.push_back(i);
    out.push_back(text.size());
    return out;
}

std::size_t length(std::string_view text)
{
    std::size_t n = 0;
    for (char c : text)
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80)
            ++n;
    return n;
}

} // namespace utf8

namespace {

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string normalize_whitespace(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool pending = false;
    for (char c : text) {
        if (is_space(c)) {
            pending = !out.empty();
        } else {
            if (pending)
                out.push_back(' ');
            pending = false;
            out.push_back(c);
        }
    }
    return out;
}

std::string fmt_num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::vector<std::string> check_snapshot(const PageSnapshot& snap)
{
    std::vector<std::string> diag;
    auto at = [](std::size_t i) { return "word " + std::to_string(i) + ": "; };
    const auto offsets = utf8::code_point_offsets(snap.page_text);
    const std::size_t page_len = offsets.size() - 1;

    if (snap.stimulus_id.empty())
        diag.push_back("stimulus_id is empty");
    if (!(snap.viewport_width_px > 0.0))
        diag.push_back("viewport_width_px must be positive");

    std::string joined;
    for (std::size_t i = 0; i < snap.words.size(); ++i) {
        const WordBox& w = snap.words[i];
        if (w.word_id != i)
            diag.push_back(at(i) + "word_id " + std::to_string(w.word_id) + " does not match reading order");
        if (w.text.empty())
            diag.push_back(at(i) + "empty text");
        if (std::any_of(w.text.begin(), w.text.end(), is_space))
            diag.push_back(at(i) + "text contains whitespace");
        if (!(w.char_start < w.char_end))
            diag.push_back(at(i) + "char_start must be < char_end");
        else if (utf8::length(w.text) != w.char_end - w.char_start)
            diag.push_back(at(i) + "text length differs from char range");
        if (w.char_end > page_len)
            diag.push_back(at(i) + "char range exceeds page text");
        if (i > 0 && w.char_start < snap.words[i - 1].char_end)
            diag.push_back("overlap at word " + std::to_string(i));
        if (w.char_start < w.char_end && w.char_end <= page_len) {
            const std::string_view slice(snap.page_text.data() + offsets[w.char_start],
                                         offsets[w.char_end] - offsets[w.char_start]);
            if (slice != w.text)
                diag.push_back(at(i) + "text does not match page text at its char range");
        }
        if (!(w.w > 0.0) || !(w.h > 0.0) || !std::isfinite(w.w) || !std::isfinite(w.h))
            diag.push_back(at(i) + "zero-area box");
        if (!std::isfinite(w.x) || !std::isfinite(w.y))
            diag.push_back(at(i) + "non-finite position");
        if (i)
            joined.push_back(' ');
        joined += w.text;
    }
    if (joined != normalize_whitespace(snap.page_text))
        diag.push_back("words do not reconstruct the whitespace-normalized page text");
    return diag;
}

std::string compute_layout_hash(const PageSnapshot& snap)
{
    Sha256 h;
    h.update("wordgaze-layout-v1\n");
    h.update(std::to_string(snap.page_text.size()));
    h.update("\n");
    h.update(snap.page_text);
    h.update("\n");
    for (const auto& w : snap.words) {
        std::string line = std::to_string(w.word_id) + '\x1f' + w.text + '\x1f' + std::to_string(w.char_start) +
                           '\x1f' + std::to_string(w.char_end) + '\x1f' + fmt_num(w.x) + '\x1f' + fmt_num(w.y) +
                           '\x1f' + fmt_num(w.w) + '\x1f' + fmt_num(w.h) + '\x1f' + w.dom_path;
        for (const auto& l : w.labels)
            line += '\x1f' + l;
        line.push_back('\n');
        h.update(line);
    }
    return h.hex_digest();
}

PageSnapshot load_snapshot(const nlohmann::json& doc)
{
    PageSnapshot snap;
    std::vector<std::string> diag;
    try {
        if (!doc.is_object())
            throw ValidationError("snapshot must be a JSON object", {"not an object"});
        if (!doc.contains("schema_version"))
            throw ValidationError("snapshot schema_version missing", {"schema_version missing"});
        const int version = doc.at("schema_version").get<int>();
        if (version != snapshot_schema_version)
            throw ValidationError("snapshot schema version mismatch",
                                  {"schema_version " + std::to_string(version) + " != " +
                                   std::to_string(snapshot_schema_version)});
        snap.stimulus_id = doc.at("stimulus_id").get<std::string>();
        snap.url = doc.value("url", std::string());
        snap.page_text = doc.at("page_text").get<std::string>();
        snap.viewport_width_px = doc.at("viewport_width_px").get<double>();
        for (const auto& jw : doc.at("words")) {
            WordBox w;
            w.word_id = jw.at("word_id").get<std::size_t>();
            w.text = jw.at("text").get<std::string>();
            w.char_start = jw.at("char_start").get<std::size_t>();
            w.char_end = jw.at("char_end").get<std::size_t>();
            w.x = jw.at("x").get<double>();
            w.y = jw.at("y").get<double>();
            w.w = jw.at("w").get<double>();
            w.h = jw.at("h").get<double>();
            w.dom_path = jw.value("dom_path", std::string());
            w.labels = jw.value("labels", std::vector<std::string>{});
            std::sort(w.labels.begin(), w.labels.end());
            w.labels.erase(std::unique(w.labels.begin(), w.labels.end()), w.labels.end());
            snap.words.push_back(std::move(w));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("snapshot does not match the schema", {e.what()});
    }

    diag = check_snapshot(snap);
    snap.layout_hash = compute_layout_hash(snap);
    if (doc.contains("layout_hash") && !doc.at("layout_hash").is_null()) {
        const auto given = doc.at("layout_hash").get<std::string>();
        if (given != snap.layout_hash)
            diag.push_back("layout_hash " + given + " does not match content (" + snap.layout_hash + ")");
    }
    if (!diag.empty()) {
        const std::string what = "snapshot '" + snap.stimulus_id + "' rejected: " + diag.front();
        throw ValidationError(what, std::move(diag));
    }
    return snap;
}

PageSnapshot load_snapshot_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open snapshot " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("snapshot " + path.string() + " is not valid JSON", {e.what()});
    }
    return load_snapshot(doc);
}

nlohmann::json snapshot_to_json(const PageSnapshot& snap)
{
    nlohmann::json words = nlohmann::json::array();
    for (const auto& w : snap.words) {
        words.push_back({{"word_id", w.word_id},
                         {"text", w.text},
                         {"char_start", w.char_start},
                         {"char_end", w.char_end},
                         {"x", w.x},
                         {"y", w.y},
                         {"w", w.w},
                         {"h", w.h},
                         {"dom_path", w.dom_path},
                         {"labels", w.labels}});
    }
    return {{"schema_version", snapshot_schema_version},
            {"stimulus_id", snap.stimulus_id},
            {"url", snap.url},
            {"page_text", snap.page_text},
            {"viewport_width_px", snap.viewport_width_px},
            {"layout_hash", snap.layout_hash.empty() ? compute_layout_hash(snap) : snap.layout_hash},
            {"words", std::move(words)}};
}

std::string serialize_snapshot(const PageSnapshot& snap)
{
    return snapshot_to_json(snap).dump(1) + "\n";
}

std::vector<LabelCount> css_vocabulary(const PageSnapshot& snap)
{
    std::map<std::string, std::size_t> counts;
    for (const auto& w : snap.words)
        for (const auto& l : w.labels)
            ++counts[l];
    std::vector<LabelCount> out;
    out.reserve(counts.size());
    for (auto& [label, n] : counts)
        out.push_back({label, n});
    return out;
}

const char* to_string(AoiMode mode) { return mode == AoiMode::Any ? "any" : "all"; }

AoiMode aoi_mode_from_string(std::string_view name)
{
    if (name == "any" || name == "Any")
        return AoiMode::Any;
    if (name == "all" || name == "All")
        return AoiMode::All;
    throw ContractViolation("unknown AOI mode '" + std::string(name) + "'");
}

std::vector<std::size_t> words_in_aoi(const PageSnapshot& snap, const std::set<std::string>& wanted, AoiMode mode,
                                      std::vector<std::string>* warnings)
{
    std::vector<std::size_t> out;
    if (wanted.empty()) {
        out.resize(snap.words.size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = i;
        return out;
    }
    if (warnings) {
        std::set<std::string> present;
        for (const auto& w : snap.words)
            present.insert(w.labels.begin(), w.labels.end());
        for (const auto& l : wanted)
            if (!present.count(l))
                warnings->push_back("label '" + l + "' does not occur on stimulus '" + snap.stimulus_id + "'");
    }
    for (const auto& w : snap.words) {
        auto has = [&](const std::string& l) { return std::binary_search(w.labels.begin(), w.labels.end(), l); };
        const bool hit = mode == AoiMode::Any ? std::any_of(wanted.begin(), wanted.end(), has)
                                              : std::all_of(wanted.begin(), wanted.end(), has);
        if (hit)
            out.push_back(w.word_id);
    }
    return out;
}

std::string text_context(const PageSnapshot& snap, std::size_t char_pos, std::size_t radius)
{
    const auto offsets = utf8::code_point_offsets(snap.page_text);
    const std::size_t len = offsets.size() - 1;
    if (char_pos > len)
        throw ContractViolation("text_context: position " + std::to_string(char_pos) + " beyond page length " +
                                std::to_string(len));
    const std::size_t lo = char_pos >= radius ? char_pos - radius : 0;
    const std::size_t hi = radius >= len - char_pos ? len : char_pos + radius;
    return snap.page_text.substr(offsets[lo], offsets[hi] - offsets[lo]);
}

} // namespace wordgaze
