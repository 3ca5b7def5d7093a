#include "leakscan/ingest.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "leakscan/error.hpp"

namespace leakscan {

namespace {

constexpr char kTokenMagic[4] = {'O', 'V', 'T', 'K'};

std::uint32_t read_u32le(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

void put_u32le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

// Decodes one UTF-8 code point starting at `i`; returns its length.
std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    }
    std::size_t len;
    char32_t min;
    if ((b0 & 0xe0) == 0xc0) {
        len = 2, cp = b0 & 0x1f, min = 0x80;
    } else if ((b0 & 0xf0) == 0xe0) {
        len = 3, cp = b0 & 0x0f, min = 0x800;
    } else if ((b0 & 0xf8) == 0xf0) {
        len = 4, cp = b0 & 0x07, min = 0x10000;
    } else {
        throw DecodeError("invalid UTF-8 lead byte", i);
    }
    if (i + len > s.size()) throw DecodeError("truncated UTF-8 sequence", i);
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xc0) != 0x80) throw DecodeError("invalid UTF-8 continuation byte", i + k);
        cp = (cp << 6) | (b & 0x3f);
    }
    if (cp < min) throw DecodeError("overlong UTF-8 encoding", i);
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff))
        throw DecodeError("invalid Unicode scalar value", i);
    return len;
}

}  // namespace

CorpusStats corpus_stats(std::span<const TokenSequence> docs, std::uint64_t whitespace_words) {
    CorpusStats stats;
    for (const auto& d : docs) stats.add(d);
    stats.num_whitespace_words = whitespace_words;
    return stats;
}

std::string normalize_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool in_space = false;
    std::size_t i = 0;
    while (i < raw.size()) {
        char32_t cp;
        const std::size_t len = decode_utf8(raw, i, cp);
        if (cp == U' ' || cp == U'\t' || cp == 0xa0) {
            if (!in_space) out.push_back(' ');
            in_space = true;
        } else if (cp == U'\r') {
            out.push_back('\n');
            in_space = false;
            if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
        } else if (cp == U'\n' || cp == 0x2028 || cp == 0x2029) {
            out.push_back('\n');
            in_space = false;
        } else {
            out.append(raw.substr(i, len));
            in_space = false;
        }
        i += len;
    }
    return out;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ' ' || text[i] == '\n') {
            if (i > start) words.emplace_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    return words;
}

std::uint64_t count_whitespace_words(std::string_view text) {
    std::uint64_t n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool sep = c == ' ' || c == '\n';
        if (!sep && !in_word) ++n;
        in_word = !sep;
    }
    return n;
}

std::vector<TokenSequence> split_documents(std::span<const TokenId> stream, TokenId boundary,
                                           std::uint64_t first_doc_id) {
    std::vector<TokenSequence> docs;
    TokenSequence cur;
    cur.doc_id = first_doc_id;
    for (TokenId t : stream) {
        if (t == boundary) {
            if (!cur.tokens.empty()) {
                docs.push_back(std::move(cur));
                cur = TokenSequence{};
                cur.doc_id = first_doc_id + docs.size();
            }
        } else {
            cur.tokens.push_back(t);
        }
    }
    if (!cur.tokens.empty()) docs.push_back(std::move(cur));
    return docs;
}

//------------------------------------------------------------------------------
// TokenFileReader

TokenFileReader::TokenFileReader(const std::filesystem::path& path, std::size_t buffer_tokens)
    : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open token file " + path.string());
    std::uint8_t head[TokenFileHeader::kSize];
    in_.read(reinterpret_cast<char*>(head), sizeof head);
    if (in_.gcount() != std::streamsize(sizeof head))
        throw FormatError("token file header truncated: " + path.string(), std::uint64_t(in_.gcount()));
    if (std::memcmp(head, kTokenMagic, 4) != 0)
        throw FormatError("bad token file magic in " + path.string(), 0);
    header_.version = read_u32le(head + 4);
    header_.token_width = read_u32le(head + 8);
    header_.vocab_size = read_u32le(head + 12);
    header_.boundary = read_u32le(head + 16);
    if (header_.version != TokenFileHeader::kVersion)
        throw FormatError("unsupported token file version " + std::to_string(header_.version), 4);
    if (header_.token_width != 2 && header_.token_width != 4)
        throw FormatError("token width must be 2 or 4, got " + std::to_string(header_.token_width), 8);
    raw_.resize(buffer_tokens * header_.token_width);
}

bool TokenFileReader::fill() {
    if (eof_) return false;
    in_.read(reinterpret_cast<char*>(raw_.data()), std::streamsize(raw_.size()));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got < raw_.size()) eof_ = true;
    const std::size_t w = header_.token_width;
    if (got % w != 0)
        throw FormatError("truncated token record", payload_offset_ + got - got % w);
    buf_.resize(got / w);
    for (std::size_t i = 0; i < buf_.size(); ++i) {
        const std::uint8_t* p = raw_.data() + i * w;
        const TokenId t = w == 2 ? TokenId(p[0] | (p[1] << 8)) : read_u32le(p);
        if (t >= header_.vocab_size && t != header_.boundary)
            throw FormatError("token id " + std::to_string(t) + " >= vocab size " +
                                  std::to_string(header_.vocab_size),
                              payload_offset_ + i * w);
        buf_[i] = t;
    }
    payload_offset_ += got;
    pos_ = 0;
    return !buf_.empty();
}

std::optional<TokenSequence> TokenFileReader::next() {
    TokenSequence seq;
    seq.doc_id = next_doc_id_;
    for (;;) {
        if (pos_ == buf_.size() && !fill()) break;
        const TokenId t = buf_[pos_++];
        if (t == header_.boundary) {
            if (!seq.tokens.empty()) break;
        } else {
            seq.tokens.push_back(t);
        }
    }
    if (seq.tokens.empty()) return std::nullopt;
    ++next_doc_id_;
    return seq;
}

std::vector<TokenSequence> load_pretokenized(const std::filesystem::path& path, TokenFileHeader* header) {
    TokenFileReader reader(path);
    if (header) *header = reader.header();
    std::vector<TokenSequence> docs;
    while (auto seq = reader.next()) docs.push_back(std::move(*seq));
    return docs;
}

void write_pretokenized(const std::filesystem::path& path, std::span<const TokenSequence> docs,
                        std::uint32_t vocab_size, TokenId boundary) {
    const std::uint32_t width = (vocab_size <= 0x10000 && boundary <= 0xffff) ? 2 : 4;
    std::string out(kTokenMagic, 4);
    put_u32le(out, TokenFileHeader::kVersion);
    put_u32le(out, width);
    put_u32le(out, vocab_size);
    put_u32le(out, boundary);
    auto put = [&](TokenId t) {
        if (width == 2) {
            out.push_back(char(t & 0xff));
            out.push_back(char((t >> 8) & 0xff));
        } else {
            put_u32le(out, t);
        }
    };
    for (std::size_t d = 0; d < docs.size(); ++d) {
        if (d > 0) put(boundary);
        for (TokenId t : docs[d].tokens) {
            if (t >= vocab_size || t == boundary)
                throw ConfigError("token id " + std::to_string(t) + " not writable with vocab size " +
                                  std::to_string(vocab_size));
            put(t);
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write token file " + path.string());
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError("write failed for " + path.string());
}

//------------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::unordered_map<std::string, TokenId> words) : ids_(std::move(words)) {
    for (const auto& [w, id] : ids_) {
        if (id >= words_.size()) words_.resize(std::size_t(id) + 1);
        words_[id] = w;
        next_id_ = std::max(next_id_, id + 1);
    }
}

Vocabulary Vocabulary::load_json(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("vocabulary " + path.string() + ": " + e.what(), e.byte);
    }
    if (!j.is_object()) throw FormatError("vocabulary " + path.string() + " must be a JSON object");
    std::unordered_map<std::string, TokenId> ids;
    for (const auto& [w, id] : j.items()) {
        if (!id.is_number_unsigned()) throw FormatError("vocabulary id for '" + w + "' is not unsigned");
        ids.emplace(w, id.get<TokenId>());
    }
    return Vocabulary(std::move(ids));
}

void Vocabulary::save_json(const std::filesystem::path& path) const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (TokenId id = 0; id < words_.size(); ++id)
        if (auto it = ids_.find(words_[id]); it != ids_.end() && it->second == id) j[words_[id]] = id;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write vocabulary " + path.string());
    f << j.dump() << '\n';
}

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
    if (auto it = ids_.find(std::string(word)); it != ids_.end()) return it->second;
    return std::nullopt;
}

TokenId Vocabulary::intern(std::string_view word) {
    auto [it, inserted] = ids_.try_emplace(std::string(word), next_id_);
    if (inserted) {
        words_.emplace_back(word);
        ++next_id_;
    }
    return it->second;
}

std::string_view Vocabulary::word(TokenId id) const {
    return id < words_.size() ? std::string_view(words_[id]) : std::string_view();
}

TokenSequence tokenize_whitespace(std::string_view text, Vocabulary& vocab, VocabMode mode,
                                  std::uint64_t doc_id) {
    TokenSequence seq;
    seq.doc_id = doc_id;
    const auto words = split_words(text);
    seq.tokens.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (mode == VocabMode::open) {
            seq.tokens.push_back(vocab.intern(words[i]));
        } else if (auto id = vocab.find(words[i])) {
            seq.tokens.push_back(*id);
        } else {
            throw ConfigError("out-of-vocabulary word '" + words[i] + "' at word index " + std::to_string(i));
        }
    }
    return seq;
}

//------------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> read_jsonl_texts(const std::filesystem::path& path, const std::string& field) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<std::string> texts;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(path.string() + ": invalid JSON on line " + std::to_string(lineno), lineno);
        }
        if (!j.is_object() || !j.contains(field) || !j[field].is_string())
            throw FormatError(path.string() + ": line " + std::to_string(lineno) + " lacks string field '" +
                                  field + "'",
                              lineno);
        texts.push_back(j[field].get<std::string>());
    }
    return texts;
}

}  // namespace leakscan
