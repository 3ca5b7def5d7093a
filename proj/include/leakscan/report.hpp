#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakscan/cdawg.hpp"
#include "leakscan/ingest.hpp"
#include "leakscan/ngram.hpp"
#include "leakscan/query.hpp"

namespace leakscan {

struct Passage {
    std::string id;
    std::vector<TokenId> tokens;
    // Whitespace words of the source text, and for every token the index of
    // the word it came from. Both empty when no word forms are known.
    std::vector<std::string> words;
    std::vector<std::uint32_t> token_word;
};

struct PassageSet {
    std::vector<Passage> passages;
    // Vocabulary size the passages were tokenized with; 0 when undeclared.
    std::uint32_t vocab_size = 0;
};

// Loads passages from a .txt, .tok or .jsonl file, or from every such file in
// a directory (sorted by name).
//   .txt    one passage, id = file stem; needs `vocab`
//   .tok    one passage per document, id = stem#k
//   .jsonl  one passage per line: {"id", "text"} or {"id", "tokens", ["words", "token_word"]}
// Text is normalized and split into whitespace words. Words the vocabulary
// does not know get ids past its end, so they never match the index.
PassageSet load_passages(const std::filesystem::path& path, const Vocabulary* vocab = nullptr);

// One passage from a JSON object in the .jsonl passage schema.
Passage passage_from_json(const nlohmann::json& j, std::string default_id, const Vocabulary* vocab = nullptr);

struct ChanceConfig {
    const NgramModel* model = nullptr;
    double n_words = 0;
    double alpha = 0.05;
};

struct AnalyzeOptions {
    std::string corpus_id;
    std::optional<ChanceConfig> chance;
    // Maps token ids back to words. Enables overlap_text, and supplies word
    // forms for passages that carry none.
    const Vocabulary* detokenizer = nullptr;
    unsigned workers = 0;
};

struct OverlapRecord {
    std::string corpus_id;
    std::string passage_id;
    std::uint32_t passage_len = 0;
    std::uint32_t overlap_len = 0;
    std::uint64_t overlap_frequency = 0;
    std::vector<TokenId> overlap_token_ids;
    std::optional<std::string> overlap_text;
    std::optional<double> ngram_log_prob;
    std::optional<double> appear_prob;
    std::optional<bool> improbable;
    // Set with the chance fields: the overlap cuts a word, so the scored
    // span was widened to whole words.
    std::optional<bool> partial_word;

    bool operator==(const OverlapRecord&) const = default;
};

// One record per passage, sorted by (corpus_id, passage_id). With several
// indexes the per-chunk results are merged first. Throws ConfigError when the
// passages' declared vocabulary differs from the index's, and
// CapabilityError when an index has no counts.
std::vector<OverlapRecord> analyze(std::span<const CdawgIndex> indexes, const PassageSet& passages,
                                   const AnalyzeOptions& options);
std::vector<OverlapRecord> analyze(const CdawgIndex& index, const PassageSet& passages,
                                   const AnalyzeOptions& options);

// Same as analyze over a chunk set, holding one loaded index at a time.
std::vector<OverlapRecord> analyze_index_files(std::span<const std::filesystem::path> paths,
                                               const PassageSet& passages, const AnalyzeOptions& options);

// Builds the record for one passage from its (merged) query result.
OverlapRecord make_record(const OverlapResult& result, const Passage& passage, const AnalyzeOptions& options);

nlohmann::ordered_json to_json(const OverlapRecord& record);
OverlapRecord record_from_json(const nlohmann::json& j);

void emit_jsonl(std::span<const OverlapRecord> records, const std::filesystem::path& path);
std::string to_jsonl(std::span<const OverlapRecord> records);
std::vector<OverlapRecord> read_jsonl_records(const std::filesystem::path& path);

// Writes figure1.csv (passage_len vs overlap_len) and figure2.csv
// (overlap_len vs overlap_frequency) into `dir`.
void emit_figure_data(std::span<const OverlapRecord> records, const std::filesystem::path& dir);

}  // namespace leakscan
