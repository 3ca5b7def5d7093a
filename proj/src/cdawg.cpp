#include <algorithm>
#include <cstring>

#include "cdawg_storage.hpp"
#include "leakscan/cdawg.hpp"

namespace leakscan {

bool CdawgIndex::is_mapped() const noexcept {
    for (const detail::IndexStorage* s = storage_.get(); s; s = s->parent.get())
        if (s->mapping.size() > 0) return true;
    return false;
}

TokenId CdawgIndex::token_at(std::uint64_t pos) const noexcept {
    if (token_width_ == 2) {
        std::uint16_t v;
        std::memcpy(&v, tokens_.data() + pos * 2, 2);
        return v;
    }
    std::uint32_t v;
    std::memcpy(&v, tokens_.data() + pos * 4, 4);
    return v;
}

std::uint32_t CdawgIndex::find_edge(std::uint32_t node, TokenId token) const noexcept {
    const std::uint32_t lo = node_edges_[node];
    const std::uint32_t hi = node_edges_[node + 1];
    if (hi - lo <= 8) {
        for (std::uint32_t e = lo; e < hi; ++e)
            if (edge_token_[e] == token) return e;
        return kNoNode;
    }
    const auto first = edge_token_.begin() + lo;
    const auto last = edge_token_.begin() + hi;
    const auto it = std::lower_bound(first, last, token);
    return (it != last && *it == token) ? static_cast<std::uint32_t>(it - edge_token_.begin()) : kNoNode;
}

MatchCursor CdawgIndex::rescan(std::uint32_t node, std::uint64_t pos, std::uint32_t len) const noexcept {
    MatchCursor c;
    c.node = node;
    while (len > 0) {
        const std::uint32_t e = find_edge(c.node, token_at(pos));
        const std::uint32_t elen = edge_len_[e];
        if (len < elen) {
            c.edge = e;
            c.offset = len;
            return c;
        }
        c.node = edge_target_[e];
        pos += elen;
        len -= elen;
    }
    return c;
}

// The cursor's string x always has its first (length - offset) tokens in the
// equivalence class of `node`. On a mismatch every suffix of x that keeps that
// prefix in the same class fails as well, so the next candidate is the
// longest string of the suffix-link node followed by the edge prefix already
// consumed.
MatchCursor CdawgIndex::step(MatchCursor c, TokenId token) const {
    for (;;) {
        if (c.offset == 0) {
            if (const std::uint32_t e = find_edge(c.node, token); e != kNoNode) {
                ++c.length;
                if (edge_len_[e] == 1) {
                    c.node = edge_target_[e];
                } else {
                    c.edge = e;
                    c.offset = 1;
                }
                return c;
            }
            if (c.node == 0) return MatchCursor{};
            c.node = node_link_[c.node];
            c.length = node_len_[c.node];
            continue;
        }

        const std::uint64_t label = edge_start_[c.edge];
        if (token_at(label + c.offset) == token) {
            ++c.length;
            if (++c.offset == edge_len_[c.edge]) {
                c.node = edge_target_[c.edge];
                c.offset = 0;
            }
            return c;
        }
        if (c.node == 0) {
            // x is the edge prefix itself: drop its first token.
            const std::uint32_t len = c.offset - 1;
            c = rescan(0, label + 1, len);
            c.length = len;
        } else {
            const std::uint32_t link = node_link_[c.node];
            const std::uint32_t len = c.offset;
            c = rescan(link, label, len);
            c.length = node_len_[link] + len;
        }
    }
}

std::optional<MatchCursor> CdawgIndex::locate(std::span<const TokenId> factor) const {
    MatchCursor c;
    std::size_t i = 0;
    while (i < factor.size()) {
        const std::uint32_t e = find_edge(c.node, factor[i]);
        if (e == kNoNode) return std::nullopt;
        const std::uint32_t elen = edge_len_[e];
        const std::uint64_t label = edge_start_[e];
        std::uint32_t k = 1;
        for (; k < elen && i + k < factor.size(); ++k)
            if (token_at(label + k) != factor[i + k]) return std::nullopt;
        i += k;
        c.length += k;
        if (k == elen) {
            c.node = edge_target_[e];
            c.offset = 0;
        } else {
            c.edge = e;
            c.offset = k;
        }
    }
    return c;
}

std::uint64_t CdawgIndex::count_at(const MatchCursor& c) const {
    if (!has_counts()) throw CapabilityError("index has no occurrence counts; rebuild with counts");
    return c.offset == 0 ? node_count_[c.node] : node_count_[edge_target_[c.edge]];
}

std::uint64_t CdawgIndex::factor_count(std::span<const TokenId> factor) const {
    if (!has_counts()) throw CapabilityError("index has no occurrence counts; rebuild with counts");
    // The empty factor starts at every slot 0..len of every document.
    if (factor.empty()) return total_tokens_ + num_docs();
    const auto c = locate(factor);
    return c ? count_at(*c) : 0;
}

}  // namespace leakscan
