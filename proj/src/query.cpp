#include "leakscan/query.hpp"

#include <algorithm>
#include <map>

namespace leakscan {

const OverlapSequence* OverlapResult::best() const {
    const OverlapSequence* pick = nullptr;
    for (const auto& o : overlaps)
        if (!pick || o.frequency > pick->frequency) pick = &o;
    return pick;
}

std::vector<std::uint32_t> matching_lengths(const CdawgIndex& index, std::span<const TokenId> query) {
    std::vector<std::uint32_t> lengths;
    lengths.reserve(query.size());
    MatchCursor c = index.start();
    for (TokenId t : query) {
        c = index.step(c, t);
        lengths.push_back(c.length);
    }
    return lengths;
}

namespace {

void finish(OverlapResult& r) {
    r.max_frequency = 0;
    for (const auto& o : r.overlaps) r.max_frequency = std::max(r.max_frequency, o.frequency);
    r.max_end_positions.clear();
    for (const auto& o : r.overlaps)
        r.max_end_positions.insert(r.max_end_positions.end(), o.end_positions.begin(), o.end_positions.end());
    std::sort(r.max_end_positions.begin(), r.max_end_positions.end());
}

}  // namespace

OverlapResult longest_overlap(const CdawgIndex& index, std::span<const TokenId> passage, std::string passage_id) {
    OverlapResult r;
    r.passage_id = std::move(passage_id);
    r.passage_len = static_cast<std::uint32_t>(passage.size());
    r.frequencies_known = index.has_counts();
    r.lengths.reserve(passage.size());

    // Counts are read while the cursor sits on each candidate; candidates
    // shorter than the running maximum are dropped as soon as it grows.
    std::vector<std::pair<std::uint32_t, std::uint64_t>> at_max;
    MatchCursor c = index.start();
    for (std::uint32_t i = 0; i < passage.size(); ++i) {
        c = index.step(c, passage[i]);
        r.lengths.push_back(c.length);
        if (c.length == 0 || c.length < r.max_len) continue;
        if (c.length > r.max_len) {
            r.max_len = c.length;
            at_max.clear();
        }
        at_max.emplace_back(i, r.frequencies_known ? index.count_at(c) : 0);
    }

    std::map<std::vector<TokenId>, std::size_t> seen;
    for (const auto& [end, freq] : at_max) {
        std::vector<TokenId> tokens(passage.begin() + (end + 1 - r.max_len), passage.begin() + end + 1);
        auto [it, fresh] = seen.try_emplace(tokens, r.overlaps.size());
        if (fresh) r.overlaps.push_back(OverlapSequence{std::move(tokens), freq, {}});
        r.overlaps[it->second].end_positions.push_back(end);
    }
    finish(r);
    return r;
}

OverlapResult merge_overlaps(std::span<const OverlapResult> results) {
    if (results.empty()) throw ConfigError("merge_overlaps needs at least one result");
    OverlapResult out;
    out.passage_id = results.front().passage_id;
    out.passage_len = results.front().passage_len;
    out.lengths.assign(out.passage_len, 0);
    out.frequencies_known = true;
    for (const auto& r : results) {
        if (r.passage_id != out.passage_id || r.passage_len != out.passage_len)
            throw ConfigError("cannot merge overlaps of passage '" + r.passage_id + "' into '" + out.passage_id + "'");
        for (std::size_t i = 0; i < r.lengths.size(); ++i) out.lengths[i] = std::max(out.lengths[i], r.lengths[i]);
        out.max_len = std::max(out.max_len, r.max_len);
        out.frequencies_known = out.frequencies_known && r.frequencies_known;
    }
    if (out.max_len == 0) return out;

    std::map<std::vector<TokenId>, std::size_t> seen;
    for (const auto& r : results) {
        if (r.max_len != out.max_len) continue;
        for (const auto& o : r.overlaps) {
            auto [it, fresh] = seen.try_emplace(o.tokens, out.overlaps.size());
            if (fresh) {
                out.overlaps.push_back(o);
            } else {
                out.overlaps[it->second].frequency += o.frequency;
            }
        }
    }
    // Order by first occurrence in the passage, as longest_overlap does.
    std::sort(out.overlaps.begin(), out.overlaps.end(),
              [](const OverlapSequence& a, const OverlapSequence& b) { return a.end_positions < b.end_positions; });
    finish(out);
    return out;
}

}  // namespace leakscan
