#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakscan/cdawg.hpp"
#include "leakscan/error.hpp"
#include "leakscan/report.hpp"

namespace leakscan {

class ClosedHandleError : public Error {
public:
    ClosedHandleError() : Error("index handle is closed") {}
};

// Foreign-language surface over an index: plain integers in, JSON mappings
// out. Holds no logic of its own; every call delegates to the query and
// report modules. Queries run concurrently; the lock only guards the handle
// slot and is never held while a query runs.
class IndexHandle {
public:
    static IndexHandle open_index(const std::filesystem::path& path);
    static IndexHandle build_index(const std::vector<std::vector<std::int64_t>>& docs, bool with_counts = true);

    IndexHandle(IndexHandle&& other) noexcept;
    IndexHandle& operator=(IndexHandle&& other) noexcept;

    std::vector<std::int64_t> matching_lengths(std::span<const std::int64_t> tokens) const;

    // Overlap record for one passage, same fields as the JSONL report.
    nlohmann::ordered_json longest_overlap(std::span<const std::int64_t> tokens,
                                           const std::string& passage_id = "0") const;

    // `passages` is an array whose items are token-id arrays (ids become
    // their array positions) or objects in the .jsonl passage schema.
    // Returns the records the analyze CLI would write, as an array.
    nlohmann::ordered_json analyze(const nlohmann::json& passages, const std::string& corpus_id = "",
                                   std::optional<ChanceConfig> chance = std::nullopt) const;

    void close();
    bool closed() const;

private:
    explicit IndexHandle(std::shared_ptr<const CdawgIndex> index);
    std::shared_ptr<const CdawgIndex> get() const;

    mutable std::mutex mu_;
    std::shared_ptr<const CdawgIndex> index_;
};

}  // namespace leakscan
