#include "leakscan/curate.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <random>

#include "leakscan/cdawg.hpp"
#include "leakscan/error.hpp"
#include "leakscan/query.hpp"
#include "parallel.hpp"

namespace leakscan {

std::uint32_t chunk_max_overlap(std::span<const TokenSequence> chunk, std::span<const TokenSequence> passages) {
    if (passages.empty()) throw ConfigError("no passages to scan against");
    BuildOptions opts;
    opts.with_counts = false;
    const auto index = CdawgIndex::build(chunk, opts);
    std::uint32_t best = 0;
    for (const auto& p : passages) {
        const auto lengths = matching_lengths(index, p.tokens);
        if (!lengths.empty()) best = std::max(best, *std::max_element(lengths.begin(), lengths.end()));
    }
    return best;
}

ChunkLoader token_file_loader(std::filesystem::path base) {
    return [base = std::move(base)](const ChunkManifest& m) {
        std::vector<TokenSequence> docs;
        for (const auto& p : m.paths) {
            std::filesystem::path path(p);
            if (path.is_relative()) path = base / path;
            TokenFileReader reader(path);
            while (auto doc = reader.next()) {
                doc->doc_id = docs.size();
                docs.push_back(std::move(*doc));
            }
        }
        return docs;
    };
}

void scan_chunks(std::vector<ChunkManifest>& manifests, std::span<const TokenSequence> passages,
                 const ChunkLoader& load, unsigned workers) {
    if (passages.empty()) throw ConfigError("no passages to scan against");
    if (workers == 0) workers = detail::default_workers();
    // Each slot is written by exactly one worker.
    detail::parallel_for(manifests.size(), workers, [&](std::size_t i) {
        auto& m = manifests[i];
        const auto docs = load(m);
        std::uint64_t n = 0;
        for (const auto& d : docs) n += d.tokens.size();
        if (n == 0) throw ConfigError("chunk " + m.chunk_id + " holds no tokens");
        m.num_tokens = n;
        m.max_overlap = chunk_max_overlap(docs, passages);
    });
}

std::vector<ChunkManifest> filter_chunks(std::span<const ChunkManifest> manifests, std::uint32_t threshold) {
    std::vector<ChunkManifest> out(manifests.begin(), manifests.end());
    for (auto& m : out) {
        if (!m.max_overlap) throw ConfigError("chunk " + m.chunk_id + " has not been scanned");
        // "no more than" the threshold: inclusive.
        m.eligible = *m.max_overlap <= threshold;
    }
    return out;
}

namespace {

// Uniform draw from [0, n) by rejection, so the stream depends only on the
// engine and not on the library's distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t reject_below = (0 - n) % n;  // 2^64 mod n
    for (;;) {
        const std::uint64_t x = rng();
        if (x >= reject_below) return x % n;
    }
}

}  // namespace

std::vector<std::string> sample_chunks(std::span<const ChunkManifest> manifests, std::size_t k,
                                       std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& m : manifests)
        if (m.eligible) ids.push_back(m.chunk_id);
    if (k > ids.size())
        throw ConfigError("cannot sample " + std::to_string(k) + " chunks: only " + std::to_string(ids.size()) +
                          " eligible");
    // Start from a canonical order so the sample does not depend on input order.
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < k; ++i) std::swap(ids[i], ids[i + bounded(rng, ids.size() - i)]);
    ids.resize(k);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<ChunkManifest> read_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest " + path.string());
    std::vector<ChunkManifest> out;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fail = [&](const std::string& why) {
            throw FormatError(path.string() + " line " + std::to_string(lineno) + ": " + why, lineno);
        };
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            fail("invalid JSON");
        }
        if (!j.is_object()) fail("record is not an object");
        ChunkManifest m;
        try {
            const auto& id = j.at("chunk_id");
            m.chunk_id = id.is_string() ? id.get<std::string>() : id.dump();
            m.paths = j.at("paths").get<std::vector<std::string>>();
            if (j.contains("num_tokens")) m.num_tokens = j["num_tokens"].get<std::uint64_t>();
            if (j.contains("max_overlap") && !j["max_overlap"].is_null())
                m.max_overlap = j["max_overlap"].get<std::uint32_t>();
            if (j.contains("eligible")) m.eligible = j["eligible"].get<bool>();
            if (j.contains("sampled")) m.sampled = j["sampled"].get<bool>();
        } catch (const nlohmann::json::exception& e) {
            fail(e.what());
        }
        out.push_back(std::move(m));
    }
    return out;
}

void write_manifest(const std::filesystem::path& path, std::span<const ChunkManifest> manifests) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write manifest " + path.string());
    for (const auto& m : manifests) {
        nlohmann::ordered_json j;
        j["chunk_id"] = m.chunk_id;
        j["paths"] = m.paths;
        j["num_tokens"] = m.num_tokens;
        j["max_overlap"] = m.max_overlap ? nlohmann::ordered_json(*m.max_overlap) : nlohmann::ordered_json();
        j["eligible"] = m.eligible;
        j["sampled"] = m.sampled;
        f << j.dump() << '\n';
    }
    if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace leakscan
