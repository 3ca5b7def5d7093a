#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "leakscan/error.hpp"
#include "leakscan/ingest.hpp"

namespace leakscan {

struct BuildOptions {
    bool with_counts = true;
    // Intended for memory-mapped loading; recorded in the index file flags.
    bool disk_backed = false;
    // Declared vocabulary size; 0 infers max token id + 1.
    std::uint32_t vocab_size = 0;
    // Whitespace words of the source text, 0 if unknown.
    std::uint64_t whitespace_words = 0;
};

enum class LoadMode {
    automatic,  // mapped when the file carries the disk-backed flag
    in_memory,
    mapped,
};

// Position of an incremental suffix match inside the index.
//
// `offset == 0` means the cursor sits exactly on `node`; otherwise it is
// `offset` tokens along edge `edge` leaving `node`. `length` is the length of
// the longest suffix of the consumed query that occurs in the corpus.
struct MatchCursor {
    std::uint32_t node = 0;
    std::uint32_t edge = 0;
    std::uint32_t offset = 0;
    std::uint32_t length = 0;

    bool operator==(const MatchCursor&) const = default;
};

class IndexLoadError : public FormatError {
public:
    enum class Kind { bad_magic, version_mismatch, checksum, truncated, corrupt };

    IndexLoadError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

namespace detail {
struct IndexStorage;
}

// Compacted directed acyclic word graph over a set of documents.
//
// Accepts exactly the factors of the indexed documents; factors never cross
// document boundaries. Nodes are the automaton states that are the root,
// branch, or end some document; every edge label is a span into the retained
// token store. Immutable after construction and safe for concurrent readers.
class CdawgIndex {
public:
    static constexpr std::uint32_t kFormatVersion = 1;
    static constexpr std::uint32_t kNoNode = 0xffffffffu;

    CdawgIndex() = default;

    // Throws ConfigError when no document is non-empty and FormatError when a
    // token id is outside the declared vocabulary.
    static CdawgIndex build(std::span<const TokenSequence> docs, const BuildOptions& options = {});

    static CdawgIndex load(const std::filesystem::path& path, LoadMode mode = LoadMode::automatic);
    void save(const std::filesystem::path& path) const;

    // Returns a copy carrying per-node occurrence counts.
    CdawgIndex annotate_counts() const;

    MatchCursor start() const noexcept { return {}; }
    MatchCursor step(MatchCursor cursor, TokenId token) const;

    // Cursor after walking `factor` from the root, or nullopt if it is not a factor.
    std::optional<MatchCursor> locate(std::span<const TokenId> factor) const;
    bool contains(std::span<const TokenId> factor) const { return locate(factor).has_value(); }

    // Occurrences (document, start) of `factor`, overlapping ones included.
    // Throws CapabilityError when counts are absent.
    std::uint64_t factor_count(std::span<const TokenId> factor) const;
    // Occurrence count of the string a cursor currently matches.
    std::uint64_t count_at(const MatchCursor& cursor) const;

    bool has_counts() const noexcept { return !node_count_.empty(); }
    bool disk_backed() const noexcept { return disk_backed_; }
    bool is_mapped() const noexcept;

    std::size_t num_states() const noexcept { return node_len_.size(); }
    std::size_t num_edges() const noexcept { return edge_token_.size(); }
    std::uint64_t source_len() const noexcept { return total_tokens_; }
    std::uint64_t num_docs() const noexcept { return doc_offsets_.empty() ? 0 : doc_offsets_.size() - 1; }
    std::uint32_t vocab_size() const noexcept { return vocab_size_; }
    std::uint64_t whitespace_words() const noexcept { return whitespace_words_; }
    std::uint32_t token_width() const noexcept { return token_width_; }

    TokenId token_at(std::uint64_t pos) const noexcept;

private:
    friend struct IndexBuilder;
    friend struct IndexCodec;

    std::uint32_t find_edge(std::uint32_t node, TokenId token) const noexcept;
    // Walks `len` tokens of the store starting at `pos` from `node`; the path must exist.
    MatchCursor rescan(std::uint32_t node, std::uint64_t pos, std::uint32_t len) const noexcept;

    std::shared_ptr<const detail::IndexStorage> storage_;

    std::span<const std::uint64_t> doc_offsets_;
    std::span<const std::byte> tokens_;
    std::span<const std::uint32_t> node_len_;
    std::span<const std::uint32_t> node_link_;
    std::span<const std::uint32_t> node_terminal_;
    std::span<const std::uint32_t> node_edges_;
    std::span<const std::uint32_t> edge_token_;
    std::span<const std::uint32_t> edge_target_;
    std::span<const std::uint32_t> edge_start_;
    std::span<const std::uint32_t> edge_len_;
    std::span<const std::uint64_t> node_count_;

    std::uint64_t total_tokens_ = 0;
    std::uint64_t whitespace_words_ = 0;
    std::uint32_t vocab_size_ = 0;
    std::uint32_t token_width_ = 4;
    bool disk_backed_ = false;
};

}  // namespace leakscan
