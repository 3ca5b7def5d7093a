#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "leakscan/cdawg.hpp"

namespace leakscan {

// One distinct token sequence of maximal overlap length.
struct OverlapSequence {
    std::vector<TokenId> tokens;
    // Occurrences in the corpus; 0 when the index carries no counts.
    std::uint64_t frequency = 0;
    // 0-based passage indices of the last token of each occurrence.
    std::vector<std::uint32_t> end_positions;

    bool operator==(const OverlapSequence&) const = default;
};

struct OverlapResult {
    std::string passage_id;
    std::uint32_t passage_len = 0;
    std::vector<std::uint32_t> lengths;
    std::uint32_t max_len = 0;
    std::vector<std::uint32_t> max_end_positions;
    // Distinct maximal overlaps in order of first occurrence in the passage.
    std::vector<OverlapSequence> overlaps;
    // Highest frequency among `overlaps`.
    std::uint64_t max_frequency = 0;
    bool frequencies_known = false;

    // The overlap reported for the passage: highest frequency, earliest on ties.
    const OverlapSequence* best() const;

    bool operator==(const OverlapResult&) const = default;
};

// Position i holds the length of the longest suffix of query[0..=i] that
// occurs in the corpus.
std::vector<std::uint32_t> matching_lengths(const CdawgIndex& index, std::span<const TokenId> query);

// Frequencies are filled in when the index carries counts.
OverlapResult longest_overlap(const CdawgIndex& index, std::span<const TokenId> passage,
                              std::string passage_id = {});

// Combines results for one passage queried against disjoint chunk indexes.
// Throws ConfigError when the results describe different passages.
OverlapResult merge_overlaps(std::span<const OverlapResult> results);

}  // namespace leakscan
