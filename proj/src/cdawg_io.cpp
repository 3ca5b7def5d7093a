// Index file layout (little-endian, every table padded to 8 bytes):
//
//   0  char[4] magic "CDWG"
//   4  u32     format version
//   8  u32     flags (bit 0: counts present, bit 1: disk-backed layout)
//  12  u32     token width in bytes (2 or 4)
//  16  u64     document count
//  24  u64     total tokens
//  32  u64     node count N
//  40  u64     edge count E
//  48  u32     vocab size
//  52  u32     reserved (0)
//  56  u64     whitespace words of the source text (0 if unknown)
//  64  u64[num_docs + 1]   document offsets
//      width * total       token store
//      u32[N] node_len, u32[N] node_link, u32[N] node_terminal, u32[N + 1] node_edges
//      u32[E] edge_token, u32[E] edge_target, u32[E] edge_start, u32[E] edge_len
//      u64[N] node_count                 (only with counts)
//      u64    checksum: FNV-1a over the preceding 64-bit words

#include <bit>
#include <cstring>
#include <fstream>
#include <type_traits>

#include "cdawg_storage.hpp"
#include "leakscan/cdawg.hpp"

namespace leakscan {

static_assert(std::endian::native == std::endian::little, "index files are little-endian");

namespace {

constexpr char kMagic[4] = {'C', 'D', 'W', 'G'};
constexpr std::size_t kHeaderSize = 64;
constexpr std::uint32_t kFlagCounts = 1u << 0;
constexpr std::uint32_t kFlagDiskBacked = 1u << 1;

constexpr std::uint64_t pad8(std::uint64_t n) { return (n + 7) & ~std::uint64_t{7}; }

class Fnv64 {
public:
    void update(std::span<const std::uint64_t> words) {
        for (std::uint64_t w : words) {
            h_ ^= w;
            h_ *= 0x100000001b3ull;
        }
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ull;
};

// Streams padded tables to a file while checksumming them.
class TableWriter {
public:
    explicit TableWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw IoError("cannot write index " + path.string());
        path_ = path;
    }

    void write(const void* data, std::size_t bytes) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        while (bytes > 0) {
            const std::size_t take = std::min(bytes, sizeof(buf_) - fill_);
            std::memcpy(reinterpret_cast<std::uint8_t*>(buf_) + fill_, p, take);
            fill_ += take;
            p += take;
            bytes -= take;
            if (fill_ == sizeof(buf_)) flush();
        }
    }

    template <typename T>
    void table(std::span<const T> t) {
        write(t.data(), t.size_bytes());
        const std::size_t pad = pad8(t.size_bytes()) - t.size_bytes();
        static constexpr std::uint8_t zeros[8] = {};
        write(zeros, pad);
    }

    void finish() {
        flush();
        const std::uint64_t sum = fnv_.value();
        out_.write(reinterpret_cast<const char*>(&sum), sizeof sum);
        out_.flush();
        if (!out_) throw IoError("write failed for " + path_.string());
    }

private:
    void flush() {
        // Tables are padded, so flushes that are not final are word-aligned.
        const std::size_t words = fill_ / 8;
        fnv_.update({buf_, words});
        out_.write(reinterpret_cast<const char*>(buf_), std::streamsize(fill_));
        fill_ = 0;
    }

    std::ofstream out_;
    std::filesystem::path path_;
    std::uint64_t buf_[1 << 13];
    std::size_t fill_ = 0;
    Fnv64 fnv_;
};

struct Header {
    std::uint32_t version, flags, token_width;
    std::uint64_t num_docs, total_tokens, num_nodes, num_edges;
    std::uint32_t vocab_size;
    std::uint64_t whitespace_words;
};

template <typename T>
T get(const std::byte* p) {
    T v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

}  // namespace

struct IndexCodec {
    static void save(const CdawgIndex& index, const std::filesystem::path& path) {
        std::uint8_t head[kHeaderSize] = {};
        std::memcpy(head, kMagic, 4);
        auto put32 = [&](std::size_t at, std::uint32_t v) { std::memcpy(head + at, &v, 4); };
        auto put64 = [&](std::size_t at, std::uint64_t v) { std::memcpy(head + at, &v, 8); };
        // Tokens fit 16 bits whenever the declared vocabulary does.
        const std::uint32_t width = index.vocab_size_ <= 0x10000 ? 2 : 4;
        std::uint32_t flags = 0;
        if (index.has_counts()) flags |= kFlagCounts;
        if (index.disk_backed_) flags |= kFlagDiskBacked;
        put32(4, CdawgIndex::kFormatVersion);
        put32(8, flags);
        put32(12, width);
        put64(16, index.num_docs());
        put64(24, index.total_tokens_);
        put64(32, index.num_states());
        put64(40, index.num_edges());
        put32(48, index.vocab_size_);
        put64(56, index.whitespace_words_);

        TableWriter w(path);
        w.write(head, sizeof head);
        w.table(index.doc_offsets_);
        if (width == index.token_width_) {
            w.table(index.tokens_);
        } else {
            std::vector<std::uint8_t> narrowed;
            narrowed.reserve(index.total_tokens_ * width);
            for (std::uint64_t i = 0; i < index.total_tokens_; ++i) {
                const TokenId t = index.token_at(i);
                for (std::uint32_t b = 0; b < width; ++b) narrowed.push_back(std::uint8_t(t >> (8 * b)));
            }
            w.table(std::span<const std::uint8_t>(narrowed));
        }
        w.table(index.node_len_);
        w.table(index.node_link_);
        w.table(index.node_terminal_);
        w.table(index.node_edges_);
        w.table(index.edge_token_);
        w.table(index.edge_target_);
        w.table(index.edge_start_);
        w.table(index.edge_len_);
        if (index.has_counts()) w.table(index.node_count_);
        w.finish();
    }

    static CdawgIndex load(const std::filesystem::path& path, LoadMode mode) {
        using Kind = IndexLoadError::Kind;
        const std::string name = path.string();

        std::ifstream probe(path, std::ios::binary);
        if (!probe) throw IoError("cannot open index " + name);
        std::byte head[kHeaderSize];
        probe.read(reinterpret_cast<char*>(head), sizeof head);
        if (probe.gcount() >= 4 && std::memcmp(head, kMagic, 4) != 0)
            throw IndexLoadError(Kind::bad_magic, name + ": not an index file (bad magic)");
        if (probe.gcount() != std::streamsize(sizeof head))
            throw IndexLoadError(Kind::truncated, name + ": truncated header");
        const std::uint32_t version = get<std::uint32_t>(head + 4);
        if (version != CdawgIndex::kFormatVersion)
            throw IndexLoadError(Kind::version_mismatch, name + ": index format version " + std::to_string(version) +
                                                             ", expected " +
                                                             std::to_string(CdawgIndex::kFormatVersion));
        const std::uint32_t flags = get<std::uint32_t>(head + 8);
        probe.close();

        const bool mapped = mode == LoadMode::mapped || (mode == LoadMode::automatic && (flags & kFlagDiskBacked));
        auto storage = std::make_shared<detail::IndexStorage>();
        std::span<const std::byte> bytes;
        if (mapped) {
            storage->mapping = MappedFile(path);
            bytes = storage->mapping.bytes();
        } else {
            std::ifstream in(path, std::ios::binary | std::ios::ate);
            const auto size = static_cast<std::size_t>(in.tellg());
            in.seekg(0);
            storage->image.resize((size + 7) / 8);
            in.read(reinterpret_cast<char*>(storage->image.data()), std::streamsize(size));
            if (!in) throw IoError("read failed for " + name);
            bytes = std::as_bytes(std::span<const std::uint64_t>(storage->image)).first(size);
        }
        return decode(bytes, std::move(storage), name);
    }

    static CdawgIndex decode(std::span<const std::byte> bytes, std::shared_ptr<detail::IndexStorage> storage,
                             const std::string& name) {
        using Kind = IndexLoadError::Kind;
        const std::byte* base = bytes.data();
        Header h{};
        h.version = get<std::uint32_t>(base + 4);
        h.flags = get<std::uint32_t>(base + 8);
        h.token_width = get<std::uint32_t>(base + 12);
        h.num_docs = get<std::uint64_t>(base + 16);
        h.total_tokens = get<std::uint64_t>(base + 24);
        h.num_nodes = get<std::uint64_t>(base + 32);
        h.num_edges = get<std::uint64_t>(base + 40);
        h.vocab_size = get<std::uint32_t>(base + 48);
        h.whitespace_words = get<std::uint64_t>(base + 56);
        if (h.token_width != 2 && h.token_width != 4)
            throw IndexLoadError(Kind::corrupt, name + ": bad token width " + std::to_string(h.token_width));
        if (h.num_nodes == 0 || h.num_nodes >= CdawgIndex::kNoNode || h.num_edges >= CdawgIndex::kNoNode ||
            h.total_tokens >= CdawgIndex::kNoNode || h.num_docs > h.total_tokens)
            throw IndexLoadError(Kind::corrupt, name + ": implausible table sizes in header");

        const bool counts = h.flags & kFlagCounts;
        std::uint64_t expected = kHeaderSize;
        expected += pad8(8 * (h.num_docs + 1));
        expected += pad8(h.token_width * h.total_tokens);
        expected += 3 * pad8(4 * h.num_nodes) + pad8(4 * (h.num_nodes + 1));
        expected += 4 * pad8(4 * h.num_edges);
        if (counts) expected += 8 * h.num_nodes;
        expected += 8;
        if (bytes.size() < expected)
            throw IndexLoadError(Kind::truncated, name + ": truncated (" + std::to_string(bytes.size()) + " of " +
                                                      std::to_string(expected) + " bytes)");
        if (bytes.size() > expected)
            throw IndexLoadError(Kind::corrupt, name + ": trailing bytes after checksum");

        const auto words =
            std::span<const std::uint64_t>(reinterpret_cast<const std::uint64_t*>(base), expected / 8 - 1);
        Fnv64 fnv;
        fnv.update(words);
        if (fnv.value() != get<std::uint64_t>(base + expected - 8))
            throw IndexLoadError(Kind::checksum, name + ": checksum mismatch");

        std::size_t at = kHeaderSize;
        auto take = [&]<typename T>(std::uint64_t count, std::type_identity<T>) {
            const auto* p = reinterpret_cast<const T*>(base + at);
            at += pad8(count * sizeof(T));
            return std::span<const T>(p, count);
        };
        CdawgIndex index;
        index.doc_offsets_ = take(h.num_docs + 1, std::type_identity<std::uint64_t>{});
        index.tokens_ = std::span<const std::byte>(base + at, h.token_width * h.total_tokens);
        at += pad8(h.token_width * h.total_tokens);
        index.node_len_ = take(h.num_nodes, std::type_identity<std::uint32_t>{});
        index.node_link_ = take(h.num_nodes, std::type_identity<std::uint32_t>{});
        index.node_terminal_ = take(h.num_nodes, std::type_identity<std::uint32_t>{});
        index.node_edges_ = take(h.num_nodes + 1, std::type_identity<std::uint32_t>{});
        index.edge_token_ = take(h.num_edges, std::type_identity<std::uint32_t>{});
        index.edge_target_ = take(h.num_edges, std::type_identity<std::uint32_t>{});
        index.edge_start_ = take(h.num_edges, std::type_identity<std::uint32_t>{});
        index.edge_len_ = take(h.num_edges, std::type_identity<std::uint32_t>{});
        if (counts) index.node_count_ = take(h.num_nodes, std::type_identity<std::uint64_t>{});
        index.total_tokens_ = h.total_tokens;
        index.vocab_size_ = h.vocab_size;
        index.whitespace_words_ = h.whitespace_words;
        index.token_width_ = h.token_width;
        index.disk_backed_ = h.flags & kFlagDiskBacked;
        index.storage_ = std::move(storage);
        validate(index, name);
        return index;
    }

    // Cheap structural checks so a corrupt but checksummed file cannot send
    // traversal out of bounds.
    static void validate(const CdawgIndex& x, const std::string& name) {
        auto fail = [&](const char* what) {
            throw IndexLoadError(IndexLoadError::Kind::corrupt, name + ": " + what);
        };
        const std::size_t n = x.num_states(), m = x.num_edges();
        if (x.node_edges_[0] != 0 || x.node_edges_[n] != m) fail("edge offsets out of range");
        for (std::size_t u = 0; u < n; ++u) {
            if (x.node_edges_[u] > x.node_edges_[u + 1]) fail("edge offsets not monotone");
            if (u > 0 && x.node_link_[u] >= n) fail("suffix link out of range");
        }
        for (std::size_t e = 0; e < m; ++e) {
            if (x.edge_target_[e] >= n || x.edge_len_[e] == 0) fail("edge target out of range");
            if (std::uint64_t(x.edge_start_[e]) + x.edge_len_[e] > x.total_tokens_) fail("edge label out of range");
        }
        if (x.doc_offsets_.back() != x.total_tokens_) fail("document offsets disagree with token count");
    }
};

void CdawgIndex::save(const std::filesystem::path& path) const { IndexCodec::save(*this, path); }

CdawgIndex CdawgIndex::load(const std::filesystem::path& path, LoadMode mode) { return IndexCodec::load(path, mode); }

}  // namespace leakscan
