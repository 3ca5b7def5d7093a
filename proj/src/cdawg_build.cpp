// Construction: an online generalized suffix automaton (DAWG) is built one
// document at a time, then compacted by splicing out every state that has a
// single outgoing transition and ends no document.

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <limits>
#include <numeric>

#include "cdawg_storage.hpp"
#include "leakscan/cdawg.hpp"

namespace leakscan {

namespace {

constexpr std::uint32_t kNil = std::numeric_limits<std::uint32_t>::max();

struct Transition {
    TokenId token;
    std::uint32_t target;
};

// Per-state sorted transition arrays carved out of one pool. Blocks have
// power-of-two capacity and are recycled through per-class free lists.
class TransitionPool {
public:
    void reserve(std::size_t n) { pool_.reserve(n); }

    static std::uint32_t capacity(std::uint32_t count) { return count == 0 ? 0 : std::bit_ceil(count); }

    std::uint32_t allocate(std::uint32_t cap) {
        const int cls = std::countr_zero(cap);
        auto& free = free_[cls];
        if (!free.empty()) {
            const std::uint32_t off = free.back();
            free.pop_back();
            return off;
        }
        const std::size_t off = pool_.size();
        if (off + cap > std::numeric_limits<std::uint32_t>::max())
            throw ConfigError("corpus too large for the transition pool");
        pool_.resize(off + cap);
        return static_cast<std::uint32_t>(off);
    }

    void release(std::uint32_t off, std::uint32_t cap) {
        if (cap) free_[std::countr_zero(cap)].push_back(off);
    }

    Transition* at(std::uint32_t off) { return pool_.data() + off; }
    const Transition* at(std::uint32_t off) const { return pool_.data() + off; }

private:
    std::vector<Transition> pool_;
    std::array<std::vector<std::uint32_t>, 33> free_;
};

struct State {
    std::uint32_t len = 0;
    std::uint32_t link = kNil;
    std::uint32_t edge_off = 0;
    std::uint32_t edge_cnt = 0;
    std::uint32_t firstpos = 0;  // global store position of one end occurrence
    std::uint32_t terminal = 0;  // documents ending in this state
};

class SuffixAutomaton {
public:
    explicit SuffixAutomaton(std::size_t total_tokens) {
        states_.reserve(2 * total_tokens + 2);
        pool_.reserve(total_tokens * 5 / 2 + 64);
        states_.push_back(State{});
    }

    void add_document(std::span<const TokenId> doc, std::uint32_t first_pos) {
        std::uint32_t last = 0;
        for (std::size_t i = 0; i < doc.size(); ++i)
            last = extend(last, doc[i], first_pos + static_cast<std::uint32_t>(i));
        doc_ends_.push_back(last);
    }

    // A state that holds a whole document keeps it as its longest string
    // through later splits, so terminal marks are assigned once at the end.
    void mark_terminals() {
        for (std::uint32_t last : doc_ends_)
            for (std::uint32_t s = last; s != 0; s = states_[s].link) ++states_[s].terminal;
    }

    std::vector<State>& states() { return states_; }
    const TransitionPool& pool() const { return pool_; }

private:
    std::uint32_t find(std::uint32_t s, TokenId c) const {
        const State& st = states_[s];
        const Transition* e = pool_.at(st.edge_off);
        if (st.edge_cnt <= 8) {
            for (std::uint32_t i = 0; i < st.edge_cnt; ++i)
                if (e[i].token == c) return e[i].target;
            return kNil;
        }
        const Transition* end = e + st.edge_cnt;
        const Transition* it =
            std::lower_bound(e, end, c, [](const Transition& t, TokenId v) { return t.token < v; });
        return (it != end && it->token == c) ? it->target : kNil;
    }

    void redirect(std::uint32_t s, TokenId c, std::uint32_t target) {
        State& st = states_[s];
        Transition* e = pool_.at(st.edge_off);
        Transition* end = e + st.edge_cnt;
        Transition* it = std::lower_bound(e, end, c, [](const Transition& t, TokenId v) { return t.token < v; });
        it->target = target;
    }

    void add(std::uint32_t s, TokenId c, std::uint32_t target) {
        State& st = states_[s];
        const std::uint32_t cap = TransitionPool::capacity(st.edge_cnt);
        if (st.edge_cnt == cap) {
            const std::uint32_t ncap = cap == 0 ? 1 : cap * 2;
            const std::uint32_t off = pool_.allocate(ncap);
            if (st.edge_cnt) std::memcpy(pool_.at(off), pool_.at(st.edge_off), st.edge_cnt * sizeof(Transition));
            pool_.release(st.edge_off, cap);
            st.edge_off = off;
        }
        Transition* e = pool_.at(st.edge_off);
        Transition* end = e + st.edge_cnt;
        Transition* it = std::lower_bound(e, end, c, [](const Transition& t, TokenId v) { return t.token < v; });
        std::memmove(it + 1, it, (end - it) * sizeof(Transition));
        *it = Transition{c, target};
        ++st.edge_cnt;
    }

    std::uint32_t clone(std::uint32_t q, std::uint32_t len) {
        State copy = states_[q];
        copy.len = len;
        const std::uint32_t cap = TransitionPool::capacity(copy.edge_cnt);
        copy.edge_off = pool_.allocate(cap);
        std::memcpy(pool_.at(copy.edge_off), pool_.at(states_[q].edge_off), copy.edge_cnt * sizeof(Transition));
        states_.push_back(copy);
        return static_cast<std::uint32_t>(states_.size() - 1);
    }

    std::uint32_t split(std::uint32_t p, TokenId c, std::uint32_t q) {
        const std::uint32_t cl = clone(q, states_[p].len + 1);
        for (; p != kNil && find(p, c) == q; p = states_[p].link) redirect(p, c, cl);
        states_[q].link = cl;
        return cl;
    }

    std::uint32_t extend(std::uint32_t last, TokenId c, std::uint32_t pos) {
        if (const std::uint32_t q = find(last, c); q != kNil) {
            if (states_[last].len + 1 == states_[q].len) return q;
            return split(last, c, q);
        }
        State fresh;
        fresh.len = states_[last].len + 1;
        fresh.firstpos = pos;
        states_.push_back(fresh);
        const auto cur = static_cast<std::uint32_t>(states_.size() - 1);
        std::uint32_t p = last;
        for (; p != kNil && find(p, c) == kNil; p = states_[p].link) add(p, c, cur);
        if (p == kNil) {
            states_[cur].link = 0;
        } else {
            const std::uint32_t q = find(p, c);
            if (states_[p].len + 1 == states_[q].len) {
                states_[cur].link = q;
            } else {
                const std::uint32_t cl = split(p, c, q);
                states_[cur].link = cl;
            }
        }
        return cur;
    }

    std::vector<State> states_;
    std::vector<std::uint32_t> doc_ends_;
    TransitionPool pool_;
};

// State ids ordered by decreasing len (targets of transitions come first).
std::vector<std::uint32_t> order_by_len_desc(const std::vector<State>& states, std::uint32_t max_len) {
    std::vector<std::uint32_t> bucket(std::size_t(max_len) + 2, 0);
    for (const auto& s : states) ++bucket[s.len];
    for (std::size_t i = bucket.size() - 1; i-- > 0;) bucket[i] += bucket[i + 1];
    std::vector<std::uint32_t> order(states.size());
    for (std::uint32_t s = 0; s < states.size(); ++s) order[--bucket[states[s].len]] = s;
    return order;
}

}  // namespace

struct IndexBuilder {
    static CdawgIndex build(std::span<const TokenSequence> docs, const BuildOptions& options) {
        std::uint64_t total = 0;
        std::uint64_t non_empty = 0;
        std::uint32_t max_doc = 0;
        TokenId max_token = 0;
        for (const auto& d : docs) {
            total += d.tokens.size();
            if (!d.tokens.empty()) ++non_empty;
            max_doc = static_cast<std::uint32_t>(std::min<std::uint64_t>(std::max<std::uint64_t>(max_doc, d.tokens.size()), kNil - 2));
            for (TokenId t : d.tokens) max_token = std::max(max_token, t);
        }
        if (non_empty == 0) throw ConfigError("cannot build an index without a non-empty document");
        if (total >= kNil - 1) throw ConfigError("corpus exceeds 2^32-2 tokens; split it into chunks");
        const std::uint32_t vocab = options.vocab_size ? options.vocab_size : max_token + 1;
        if (options.vocab_size && max_token >= options.vocab_size)
            throw FormatError("token id " + std::to_string(max_token) + " exceeds declared vocab size " +
                              std::to_string(options.vocab_size));

        auto storage = std::make_shared<detail::IndexStorage>();
        storage->doc_offsets.reserve(non_empty + 1);
        storage->doc_offsets.push_back(0);
        storage->tokens.reserve(total);

        std::vector<State> states;
        std::vector<Transition> transitions;
        {
            SuffixAutomaton sam(total);
            for (const auto& d : docs) {
                if (d.tokens.empty()) continue;
                const auto first = static_cast<std::uint32_t>(storage->tokens.size());
                storage->tokens.insert(storage->tokens.end(), d.tokens.begin(), d.tokens.end());
                storage->doc_offsets.push_back(storage->tokens.size());
                sam.add_document(d.tokens, first);
            }
            sam.mark_terminals();
            states = std::move(sam.states());
            compact(states, sam.pool(), max_doc, *storage);
        }

        CdawgIndex index;
        index.total_tokens_ = total;
        index.vocab_size_ = vocab;
        index.whitespace_words_ = options.whitespace_words;
        index.token_width_ = 4;
        index.disk_backed_ = options.disk_backed;
        bind(index, std::move(storage));
        return options.with_counts ? index.annotate_counts() : index;
    }

    static void compact(std::vector<State>& states, const TransitionPool& pool, std::uint32_t max_len,
                        detail::IndexStorage& out) {
        const auto n = static_cast<std::uint32_t>(states.size());
        const auto order = order_by_len_desc(states, max_len);

        // end_of[s]: first kept state reached from s through single-transition
        // states; dist_of[s]: number of transitions to get there.
        std::vector<std::uint32_t> end_of(n), dist_of(n);
        auto kept = [&](std::uint32_t s) {
            return s == 0 || states[s].edge_cnt != 1 || states[s].terminal > 0;
        };
        for (std::uint32_t s : order) {
            if (kept(s)) {
                end_of[s] = s;
                dist_of[s] = 0;
            } else {
                const std::uint32_t t = pool.at(states[s].edge_off)->target;
                end_of[s] = end_of[t];
                dist_of[s] = dist_of[t] + 1;
            }
        }

        std::vector<std::uint32_t> new_id(n, kNil);
        std::uint32_t num_nodes = 0;
        std::uint64_t num_edges = 0;
        for (std::uint32_t s = 0; s < n; ++s) {
            if (kept(s)) {
                new_id[s] = num_nodes++;
                num_edges += states[s].edge_cnt;
            }
        }

        out.node_len.resize(num_nodes);
        out.node_link.resize(num_nodes);
        out.node_terminal.resize(num_nodes);
        out.node_edges.resize(std::size_t(num_nodes) + 1);
        out.edge_token.resize(num_edges);
        out.edge_target.resize(num_edges);
        out.edge_start.resize(num_edges);
        out.edge_len.resize(num_edges);

        std::uint32_t e = 0;
        for (std::uint32_t s = 0; s < n; ++s) {
            if (new_id[s] == kNil) continue;
            const std::uint32_t u = new_id[s];
            const State& st = states[s];
            out.node_len[u] = st.len;
            out.node_link[u] = st.link == kNil ? CdawgIndex::kNoNode : new_id[st.link];
            out.node_terminal[u] = st.terminal;
            out.node_edges[u] = e;
            const Transition* tr = pool.at(st.edge_off);
            for (std::uint32_t i = 0; i < st.edge_cnt; ++i, ++e) {
                const std::uint32_t t = tr[i].target;
                const std::uint32_t target = end_of[t];
                const std::uint32_t len = dist_of[t] + 1;
                out.edge_token[e] = tr[i].token;
                out.edge_target[e] = new_id[target];
                out.edge_len[e] = len;
                out.edge_start[e] = states[target].firstpos + 1 - len;
            }
        }
        out.node_edges[num_nodes] = e;
    }

    static void bind(CdawgIndex& index, std::shared_ptr<detail::IndexStorage> storage) {
        const auto& s = *storage;
        index.doc_offsets_ = s.doc_offsets;
        index.tokens_ = std::as_bytes(std::span<const std::uint32_t>(s.tokens));
        index.node_len_ = s.node_len;
        index.node_link_ = s.node_link;
        index.node_terminal_ = s.node_terminal;
        index.node_edges_ = s.node_edges;
        index.edge_token_ = s.edge_token;
        index.edge_target_ = s.edge_target;
        index.edge_start_ = s.edge_start;
        index.edge_len_ = s.edge_len;
        index.node_count_ = s.node_count;
        index.storage_ = std::move(storage);
    }
};

CdawgIndex CdawgIndex::build(std::span<const TokenSequence> docs, const BuildOptions& options) {
    return IndexBuilder::build(docs, options);
}

CdawgIndex CdawgIndex::annotate_counts() const {
    if (has_counts()) return *this;
    const std::size_t n = num_states();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    // Edge targets are strictly longer than their sources.
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return node_len_[a] > node_len_[b]; });

    auto storage = std::make_shared<detail::IndexStorage>();
    auto& count = storage->node_count;
    count.assign(n, 0);
    for (std::uint32_t u : order) {
        std::uint64_t c = u == 0 ? 0 : node_terminal_[u];
        for (std::uint32_t e = node_edges_[u]; e < node_edges_[u + 1]; ++e) c += count[edge_target_[e]];
        count[u] = c;
    }
    storage->parent = storage_;

    CdawgIndex out = *this;
    out.node_count_ = storage->node_count;
    out.storage_ = std::move(storage);
    return out;
}

}  // namespace leakscan
