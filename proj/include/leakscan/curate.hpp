#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leakscan/ingest.hpp"

namespace leakscan {

struct ChunkManifest {
    std::string chunk_id;
    std::vector<std::string> paths;
    std::uint64_t num_tokens = 0;
    // Unset until the chunk has been scanned.
    std::optional<std::uint32_t> max_overlap;
    bool eligible = false;
    bool sampled = false;

    bool operator==(const ChunkManifest&) const = default;
};

// Longest overlap between any passage and the chunk. Builds a count-free
// index for the chunk and drops it before returning.
std::uint32_t chunk_max_overlap(std::span<const TokenSequence> chunk, std::span<const TokenSequence> passages);

using ChunkLoader = std::function<std::vector<TokenSequence>(const ChunkManifest&)>;

// Reads every path of a manifest as a token file. Relative paths resolve
// against `base`.
ChunkLoader token_file_loader(std::filesystem::path base);

// Fills max_overlap and num_tokens for every manifest. Chunks are scanned by
// a pool of workers, each owning one chunk index at a time.
void scan_chunks(std::vector<ChunkManifest>& manifests, std::span<const TokenSequence> passages,
                 const ChunkLoader& load, unsigned workers = 0);

// Copies the manifests with eligible set to max_overlap <= threshold.
// Throws ConfigError if any manifest is unscanned.
std::vector<ChunkManifest> filter_chunks(std::span<const ChunkManifest> manifests, std::uint32_t threshold);

// Uniform sample of k eligible chunk ids without replacement, sorted.
// Deterministic in seed. Throws ConfigError when fewer than k are eligible.
std::vector<std::string> sample_chunks(std::span<const ChunkManifest> manifests, std::size_t k,
                                       std::uint64_t seed);

// Line-delimited JSON manifests. Only chunk_id and paths are required on input.
std::vector<ChunkManifest> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ChunkManifest> manifests);

}  // namespace leakscan
