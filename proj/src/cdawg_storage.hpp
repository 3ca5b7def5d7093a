#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "leakscan/mapped_file.hpp"

namespace leakscan::detail {

// Backing memory for a CdawgIndex: owned vectors, a file image, or a mapping.
struct IndexStorage {
    std::vector<std::uint64_t> doc_offsets;
    std::vector<std::uint32_t> tokens;
    std::vector<std::uint32_t> node_len, node_link, node_terminal, node_edges;
    std::vector<std::uint32_t> edge_token, edge_target, edge_start, edge_len;
    std::vector<std::uint64_t> node_count;

    std::vector<std::uint64_t> image;
    MappedFile mapping;

    std::shared_ptr<const IndexStorage> parent;
};

}  // namespace leakscan::detail
