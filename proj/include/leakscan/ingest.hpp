#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace leakscan {

using TokenId = std::uint32_t;

// One document: a run of token ids that never contains the boundary marker.
struct TokenSequence {
    std::uint64_t doc_id = 0;
    std::vector<TokenId> tokens;

    bool operator==(const TokenSequence&) const = default;
};

struct CorpusStats {
    std::uint64_t num_documents = 0;
    std::uint64_t num_tokens = 0;
    // 0 when the corpus came from pre-tokenized input with no source text.
    std::uint64_t num_whitespace_words = 0;

    void add(const TokenSequence& seq) {
        ++num_documents;
        num_tokens += seq.tokens.size();
    }
};

CorpusStats corpus_stats(std::span<const TokenSequence> docs, std::uint64_t whitespace_words = 0);

//------------------------------------------------------------------------------
// Text normalization

// Unifies CR, CRLF, U+2028 and U+2029 to LF and collapses every run of
// space / tab / U+00A0 to a single space. Throws DecodeError on invalid UTF-8.
std::string normalize_text(std::string_view raw);

// Whitespace-delimited words in already normalized text.
std::uint64_t count_whitespace_words(std::string_view text);

//------------------------------------------------------------------------------
// Document segmentation

std::vector<TokenSequence> split_documents(std::span<const TokenId> stream, TokenId boundary,
                                           std::uint64_t first_doc_id = 0);

//------------------------------------------------------------------------------
// Binary token files
//
// Layout (little-endian):
//   char[4]  magic "OVTK"
//   u32      format version
//   u32      token width in bytes (2 or 4)
//   u32      vocab size
//   u32      boundary id
//   payload  token ids, `width` bytes each

struct TokenFileHeader {
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::size_t kSize = 20;

    std::uint32_t version = kVersion;
    std::uint32_t token_width = 4;
    std::uint32_t vocab_size = 0;
    TokenId boundary = 0;
};

// Streams documents out of a token file with bounded memory.
class TokenFileReader {
public:
    explicit TokenFileReader(const std::filesystem::path& path, std::size_t buffer_tokens = 1 << 16);

    const TokenFileHeader& header() const noexcept { return header_; }

    // Next boundary-free document, or nullopt at end of file.
    std::optional<TokenSequence> next();

private:
    bool fill();

    std::ifstream in_;
    TokenFileHeader header_;
    std::vector<std::uint8_t> raw_;
    std::vector<TokenId> buf_;
    std::size_t pos_ = 0;
    std::uint64_t payload_offset_ = TokenFileHeader::kSize;
    std::uint64_t next_doc_id_ = 0;
    bool eof_ = false;
};

std::vector<TokenSequence> load_pretokenized(const std::filesystem::path& path,
                                             TokenFileHeader* header = nullptr);

// Writes documents separated by the boundary id. Width is 2 when the vocab fits.
void write_pretokenized(const std::filesystem::path& path, std::span<const TokenSequence> docs,
                        std::uint32_t vocab_size, TokenId boundary);

//------------------------------------------------------------------------------
// Whitespace tokenizer

enum class VocabMode { closed, open };

class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::unordered_map<std::string, TokenId> words);

    static Vocabulary load_json(const std::filesystem::path& path);
    void save_json(const std::filesystem::path& path) const;

    std::optional<TokenId> find(std::string_view word) const;
    // Assigns the next fresh id if the word is unknown.
    TokenId intern(std::string_view word);

    // One past the largest id.
    std::uint32_t size_bound() const noexcept { return next_id_; }
    std::size_t size() const noexcept { return ids_.size(); }

    // Word for an id, empty if none.
    std::string_view word(TokenId id) const;

private:
    std::unordered_map<std::string, TokenId> ids_;
    std::vector<std::string> words_;
    TokenId next_id_ = 0;
};

// Splits normalized text on single spaces and LF. In closed mode an unknown
// word raises ConfigError naming the word and its index; in open mode it is
// assigned the next id in first-occurrence order.
TokenSequence tokenize_whitespace(std::string_view text, Vocabulary& vocab, VocabMode mode,
                                  std::uint64_t doc_id = 0);

std::vector<std::string> split_words(std::string_view text);

//------------------------------------------------------------------------------
// Raw text sources

// Texts from a line-delimited JSON file; each record carries a "text" field.
std::vector<std::string> read_jsonl_texts(const std::filesystem::path& path,
                                          const std::string& field = "text");

std::string read_file(const std::filesystem::path& path);

}  // namespace leakscan
