#include "wordgaze/merge.hpp"
#include "wordgaze/error.hpp"

#include <algorithm>
#include <map>

namespace wordgaze {

std::optional<std::size_t> align_word(const WordEyeFixation& w, const PageSnapshot& base, std::size_t radius)
{
    const auto& words = base.words;
    auto by_start = [](const WordBox& b, std::size_t pos) { return b.char_start < pos; };

    auto exact = std::lower_bound(words.begin(), words.end(), w.char_start, by_start);
    if (exact != words.end() && exact->char_start == w.char_start && exact->text == w.word)
        return exact->word_id;

    const std::size_t lo = w.char_start >= radius ? w.char_start - radius : 0;
    const std::size_t hi = w.char_start + radius;
    std::optional<std::size_t> best;
    std::size_t best_delta = 0;
    for (auto it = std::lower_bound(words.begin(), words.end(), lo, by_start);
         it != words.end() && it->char_start <= hi; ++it) {
        if (it->text != w.word)
            continue;
        const std::size_t delta =
            it->char_start > w.char_start ? it->char_start - w.char_start : w.char_start - it->char_start;
        if (!best || delta < best_delta) {
            best = it->word_id;
            best_delta = delta;
        }
    }
    return best;
}

MergeResult merge_sets(std::span<const MergeInput> sets, const PageSnapshot* base, std::size_t radius)
{
    if (!base)
        throw ContractViolation("merge_sets: base snapshot missing");
    std::map<std::size_t, MergedWordFixation> merged;
    MergeResult out;
    for (const auto& set : sets) {
        for (const auto& e : set.entries) {
            if (e.stimulus_id != base->stimulus_id)
                throw ContractViolation("merge_sets: entry of stimulus '" + e.stimulus_id +
                                        "' merged onto base '" + base->stimulus_id + "'");
            const auto id = align_word(e, *base, radius);
            if (!id) {
                out.unmatched.push_back(UnmatchedEntry{set.participant_id, e});
                continue;
            }
            auto [it, fresh] = merged.try_emplace(*id);
            MergedWordFixation& m = it->second;
            if (fresh) {
                const WordBox& b = base->words[*id];
                m.word_id = *id;
                m.word = b.text;
                m.char_start = b.char_start;
            }
            auto [pit, pfresh] = m.per_participant.try_emplace(set.participant_id,
                                                               ParticipantDwell{0.0, e.first_seen_ms, e.last_seen_ms});
            ParticipantDwell& pd = pit->second;
            pd.total_ms += e.total_ms;
            if (!pfresh) {
                pd.first_seen_ms = std::min(pd.first_seen_ms, e.first_seen_ms);
                pd.last_seen_ms = std::max(pd.last_seen_ms, e.last_seen_ms);
            }
        }
    }
    out.merged.reserve(merged.size());
    for (auto& [id, m] : merged) {
        m.contributors = m.per_participant.size();
        // Summed in participant order so the total does not depend on input order.
        m.total_ms = 0.0;
        for (const auto& [p, d] : m.per_participant)
            m.total_ms += d.total_ms;
        out.merged.push_back(std::move(m));
    }
    // Make the unmatched list independent of input order.
    std::sort(out.unmatched.begin(), out.unmatched.end(), [](const UnmatchedEntry& a, const UnmatchedEntry& b) {
        if (a.participant_id != b.participant_id)
            return a.participant_id < b.participant_id;
        if (a.entry.char_start != b.entry.char_start)
            return a.entry.char_start < b.entry.char_start;
        return a.entry.word_id < b.entry.word_id;
    });
    return out;
}

std::string choose_base_layout(std::span<const std::pair<std::string, std::string>> seen)
{
    std::vector<std::string> order;
    std::map<std::string, std::set<std::string>> viewers;
    for (const auto& [layout, participant] : seen) {
        if (!viewers.count(layout))
            order.push_back(layout);
        viewers[layout].insert(participant);
    }
    std::string best;
    std::size_t best_n = 0;
    for (const auto& layout : order) {
        const std::size_t n = viewers[layout].size();
        if (n > best_n) {
            best = layout;
            best_n = n;
        }
    }
    return best;
}

double merged_total_ms(const MergeResult& result)
{
    double total = 0.0;
    for (const auto& m : result.merged)
        total += m.total_ms;
    for (const auto& u : result.unmatched)
        total += u.entry.total_ms;
    return total;
}

} // namespace wordgaze
