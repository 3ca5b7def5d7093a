#include "leakscan/handle.hpp"

#include <limits>

#include "leakscan/query.hpp"

namespace leakscan {

namespace {

std::vector<TokenId> to_tokens(std::span<const std::int64_t> ids) {
    std::vector<TokenId> out;
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] > std::numeric_limits<TokenId>::max())
            throw ConfigError("token id " + std::to_string(ids[i]) + " at position " + std::to_string(i) +
                              " is outside the 32-bit unsigned range");
        out.push_back(static_cast<TokenId>(ids[i]));
    }
    return out;
}

}  // namespace

IndexHandle::IndexHandle(std::shared_ptr<const CdawgIndex> index) : index_(std::move(index)) {}

IndexHandle::IndexHandle(IndexHandle&& other) noexcept {
    std::lock_guard lock(other.mu_);
    index_ = std::move(other.index_);
}

IndexHandle& IndexHandle::operator=(IndexHandle&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mu_, other.mu_);
        index_ = std::move(other.index_);
    }
    return *this;
}

IndexHandle IndexHandle::open_index(const std::filesystem::path& path) {
    return IndexHandle(std::make_shared<const CdawgIndex>(CdawgIndex::load(path)));
}

IndexHandle IndexHandle::build_index(const std::vector<std::vector<std::int64_t>>& docs, bool with_counts) {
    std::vector<TokenSequence> seqs;
    seqs.reserve(docs.size());
    for (const auto& d : docs) seqs.push_back(TokenSequence{seqs.size(), to_tokens(d)});
    BuildOptions opts;
    opts.with_counts = with_counts;
    return IndexHandle(std::make_shared<const CdawgIndex>(CdawgIndex::build(seqs, opts)));
}

std::shared_ptr<const CdawgIndex> IndexHandle::get() const {
    std::lock_guard lock(mu_);
    if (!index_) throw ClosedHandleError();
    return index_;
}

void IndexHandle::close() {
    std::lock_guard lock(mu_);
    index_.reset();
}

bool IndexHandle::closed() const {
    std::lock_guard lock(mu_);
    return !index_;
}

std::vector<std::int64_t> IndexHandle::matching_lengths(std::span<const std::int64_t> tokens) const {
    const auto index = get();
    const auto lengths = leakscan::matching_lengths(*index, to_tokens(tokens));
    return {lengths.begin(), lengths.end()};
}

nlohmann::ordered_json IndexHandle::longest_overlap(std::span<const std::int64_t> tokens,
                                                    const std::string& passage_id) const {
    nlohmann::json passages = nlohmann::json::array();
    passages.push_back({{"id", passage_id}, {"tokens", nlohmann::json(std::vector<std::int64_t>(tokens.begin(), tokens.end()))}});
    return analyze(passages).at(0);
}

nlohmann::ordered_json IndexHandle::analyze(const nlohmann::json& passages, const std::string& corpus_id,
                                            std::optional<ChanceConfig> chance) const {
    const auto index = get();
    if (!passages.is_array()) throw ConfigError("passages must be an array");
    PassageSet set;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        const auto& item = passages[i];
        if (item.is_array()) {
            set.passages.push_back(Passage{std::to_string(i), to_tokens(item.get<std::vector<std::int64_t>>()), {}, {}});
        } else {
            nlohmann::json copy = item;
            if (copy.is_object() && copy.contains("tokens"))
                copy["tokens"] = to_tokens(copy["tokens"].get<std::vector<std::int64_t>>());
            set.passages.push_back(passage_from_json(copy, std::to_string(i)));
        }
    }
    AnalyzeOptions opts;
    opts.corpus_id = corpus_id;
    opts.chance = chance;
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& r : leakscan::analyze(*index, set, opts)) out.push_back(to_json(r));
    return out;
}

}  // namespace leakscan
