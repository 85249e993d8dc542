#include "wordgaze/word_mapping.hpp"
#include "wordgaze/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace wordgaze {

namespace {

constexpr std::size_t max_cells = std::size_t{1} << 22;

double median(std::vector<double> v)
{
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

} // namespace

SpatialIndex::SpatialIndex(std::span<const Rect> boxes, double slop_px) : slop_(slop_px)
{
    if (!(slop_px >= 0.0) || !std::isfinite(slop_px))
        throw ContractViolation("slop must be a finite value >= 0");
    boxes_.reserve(boxes.size());
    for (const auto& b : boxes)
        boxes_.push_back(Rect{b.x0 - slop_px, b.y0 - slop_px, b.x1 + slop_px, b.y1 + slop_px});
    if (boxes_.empty())
        return;

    double max_x = boxes_[0].x1, max_y = boxes_[0].y1;
    origin_x_ = boxes_[0].x0;
    origin_y_ = boxes_[0].y0;
    std::vector<double> widths, heights;
    widths.reserve(boxes_.size());
    heights.reserve(boxes_.size());
    for (const auto& b : boxes_) {
        origin_x_ = std::min(origin_x_, b.x0);
        origin_y_ = std::min(origin_y_, b.y0);
        max_x = std::max(max_x, b.x1);
        max_y = std::max(max_y, b.y1);
        widths.push_back(b.x1 - b.x0);
        heights.push_back(b.y1 - b.y0);
    }
    const double span_x = std::max(max_x - origin_x_, 1e-9);
    const double span_y = std::max(max_y - origin_y_, 1e-9);

    // Cells about the size of a typical word; coarsen if the grid would be huge.
    cell_w_ = std::max(median(std::move(widths)), span_x / 4096.0);
    cell_h_ = std::max(median(std::move(heights)), span_y / 4096.0);
    cell_w_ = std::max(cell_w_, 1e-6);
    cell_h_ = std::max(cell_h_, 1e-6);
    auto dims = [&] {
        cols_ = static_cast<std::size_t>(std::floor(span_x / cell_w_)) + 1;
        rows_ = static_cast<std::size_t>(std::floor(span_y / cell_h_)) + 1;
    };
    dims();
    while (cols_ * rows_ > max_cells) {
        cell_w_ *= 2.0;
        cell_h_ *= 2.0;
        dims();
    }

    auto col_of = [&](double x) {
        const double c = std::floor((x - origin_x_) / cell_w_);
        return std::min(static_cast<std::size_t>(std::max(c, 0.0)), cols_ - 1);
    };
    auto row_of = [&](double y) {
        const double r = std::floor((y - origin_y_) / cell_h_);
        return std::min(static_cast<std::size_t>(std::max(r, 0.0)), rows_ - 1);
    };

    cell_start_.assign(cols_ * rows_ + 1, 0);
    for (const auto& b : boxes_)
        for (std::size_t r = row_of(b.y0); r <= row_of(b.y1); ++r)
            for (std::size_t c = col_of(b.x0); c <= col_of(b.x1); ++c)
                ++cell_start_[r * cols_ + c + 1];
    for (std::size_t i = 1; i < cell_start_.size(); ++i)
        cell_start_[i] += cell_start_[i - 1];
    cell_items_.resize(cell_start_.back());
    std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t id = 0; id < boxes_.size(); ++id) {
        const auto& b = boxes_[id];
        for (std::size_t r = row_of(b.y0); r <= row_of(b.y1); ++r)
            for (std::size_t c = col_of(b.x0); c <= col_of(b.x1); ++c)
                cell_items_[fill[r * cols_ + c]++] = static_cast<std::uint32_t>(id);
    }
}

std::optional<std::size_t> SpatialIndex::hit_test(PagePoint p) const
{
    if (boxes_.empty() || !(p.x >= origin_x_) || !(p.y >= origin_y_))
        return std::nullopt;
    const double fc = std::floor((p.x - origin_x_) / cell_w_);
    const double fr = std::floor((p.y - origin_y_) / cell_h_);
    if (fc > static_cast<double>(cols_) || fr > static_cast<double>(rows_))
        return std::nullopt;
    const std::size_t c = std::min(static_cast<std::size_t>(fc), cols_ - 1);
    const std::size_t r = std::min(static_cast<std::size_t>(fr), rows_ - 1);
    const std::size_t cell = r * cols_ + c;
    for (std::uint32_t k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) {
        const std::uint32_t id = cell_items_[k];
        if (boxes_[id].contains(p))
            return id;
    }
    return std::nullopt;
}

std::vector<Rect> word_rects(const PageSnapshot& snap)
{
    std::vector<Rect> out;
    out.reserve(snap.words.size());
    for (const auto& w : snap.words)
        out.push_back(Rect{w.x, w.y, w.x + w.w, w.y + w.h});
    return out;
}

SpatialIndex build_index(const PageSnapshot& snap, double slop_px)
{
    const auto rects = word_rects(snap);
    return SpatialIndex(rects, slop_px);
}

std::optional<std::size_t> hit_test(const SpatialIndex& index, PagePoint p) { return index.hit_test(p); }

const char* to_string(DwellMode mode) { return mode == DwellMode::PerSample ? "per_sample" : "centroid"; }

DwellMode dwell_mode_from_string(std::string_view name)
{
    if (name == "per_sample" || name == "per-sample")
        return DwellMode::PerSample;
    if (name == "centroid")
        return DwellMode::Centroid;
    throw ContractViolation("unknown dwell mode '" + std::string(name) + "'");
}

std::vector<WordEyeFixation> accumulate(const SessionKey& key, std::span<const TimedPoint> samples,
                                        const IdtResult& idt, const SpatialIndex& index, const PageSnapshot& snap,
                                        const RecordingMeta& meta, DwellMode mode)
{
    if (index.size() != snap.words.size())
        throw ContractViolation("accumulate: index was not built from this snapshot");
    const double period = meta.period_ms();
    struct Acc {
        double total = 0.0, first = 0.0, last = 0.0;
        bool seen = false;
    };
    std::map<std::size_t, Acc> acc;
    auto credit = [&](std::size_t word, double dwell, double t_first, double t_last) {
        Acc& a = acc[word];
        a.total += dwell;
        a.first = a.seen ? std::min(a.first, t_first) : t_first;
        a.last = a.seen ? std::max(a.last, t_last) : t_last;
        a.seen = true;
    };

    for (const auto& f : idt.fixations) {
        if (f.end > samples.size())
            throw ContractViolation("accumulate: fixation refers past the end of the session");
        if (mode == DwellMode::Centroid) {
            if (auto hit = index.hit_test({f.centroid_x, f.centroid_y}))
                credit(*hit, dwell_span_ms(f, period), f.start_ms, f.end_ms);
            continue;
        }
        for (std::size_t k = f.begin; k < f.end; ++k) {
            const auto& s = samples[k];
            const double dwell = k + 1 < f.end ? samples[k + 1].t_ms - s.t_ms : period;
            if (auto hit = index.hit_test({s.x, s.y}))
                credit(*hit, dwell, s.t_ms, s.t_ms);
        }
    }

    std::vector<WordEyeFixation> out;
    out.reserve(acc.size());
    for (const auto& [word, a] : acc) {
        if (!(a.total > 0.0))
            continue;
        const WordBox& w = snap.words[word];
        out.push_back(WordEyeFixation{key.participant_id, key.stimulus_id, word, w.text, w.char_start, a.total,
                                      a.first, a.last});
    }
    return out;
}

nlohmann::json wef_store_to_json(const WefStore& store)
{
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : store.entries)
        entries.push_back({{"word_id", e.word_id},
                           {"word", e.word},
                           {"char_start", e.char_start},
                           {"total_ms", e.total_ms},
                           {"first_seen_ms", e.first_seen_ms},
                           {"last_seen_ms", e.last_seen_ms}});
    return {{"schema_version", 1},
            {"participant_id", store.key.participant_id},
            {"stimulus_id", store.key.stimulus_id},
            {"layout_hash", store.layout_hash},
            {"params", store.params},
            {"entries", std::move(entries)}};
}

WefStore wef_store_from_json(const nlohmann::json& doc)
{
    WefStore s;
    try {
        if (doc.at("schema_version").get<int>() != 1)
            throw ValidationError("word-eye-fixation store schema version mismatch", {});
        s.key = {doc.at("participant_id").get<std::string>(), doc.at("stimulus_id").get<std::string>()};
        s.layout_hash = doc.at("layout_hash").get<std::string>();
        s.params = doc.value("params", nlohmann::json::object());
        for (const auto& e : doc.at("entries"))
            s.entries.push_back(WordEyeFixation{s.key.participant_id, s.key.stimulus_id,
                                                e.at("word_id").get<std::size_t>(), e.at("word").get<std::string>(),
                                                e.at("char_start").get<std::size_t>(), e.at("total_ms").get<double>(),
                                                e.at("first_seen_ms").get<double>(),
                                                e.at("last_seen_ms").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed word-eye-fixation store", {e.what()});
    }
    return s;
}

} // namespace wordgaze
