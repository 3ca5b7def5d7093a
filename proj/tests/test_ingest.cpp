#include <doctest.h>

#include <fstream>
#include <random>

#include "leakscan/error.hpp"
#include "leakscan/ingest.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace leakscan;

namespace {

// Random UTF-8 drawn from a pool that stresses the normalization rules.
std::string random_text(std::mt19937_64& rng, std::size_t pieces) {
    static const char* pool[] = {"a", "b", " ", "  ", "\t", "\r", "\n", "\r\n", "\xC2\xA0", "\xE2\x80\xA8",
                                 "\xE2\x80\xA9", "\xC3\xA9", "\xF0\x9F\x98\x80", "x y", "\n\n", "\v"};
    std::uniform_int_distribution<std::size_t> pick(0, std::size(pool) - 1);
    std::string s;
    for (std::size_t i = 0; i < pieces; ++i) s += pool[pick(rng)];
    return s;
}

std::vector<TokenId> join(const std::vector<TokenSequence>& docs, TokenId boundary) {
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i) out.push_back(boundary);
        out.insert(out.end(), docs[i].tokens.begin(), docs[i].tokens.end());
    }
    return out;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("normalize_text examples") {
    CHECK(normalize_text("a\r\nb") == "a\nb");
    CHECK(normalize_text("a \t b") == "a b");
    CHECK(normalize_text("x\ry z") == "x\ny z");
    CHECK(normalize_text("p q r") == "p\nq\nr");
    CHECK(normalize_text("a\n\nb") == "a\n\nb");
    CHECK(normalize_text("") == "");
}

TEST_CASE("normalize_text rejects invalid UTF-8 with the byte offset") {
    auto offset_of = [](std::string_view s) {
        try {
            normalize_text(s);
        } catch (const DecodeError& e) {
            return e.offset();
        }
        return std::size_t(-1);
    };
    CHECK(offset_of("ab\xFF") == 2);
    CHECK(offset_of("a\xC3") == 1);
    CHECK(offset_of("abc\xE2\x28\xA1") == 4);
    CHECK(offset_of("\xC0\xAF") == 0);
    CHECK(offset_of("\xED\xA0\x80") == 0);  // surrogate
}

TEST_CASE("normalize_text is idempotent and leaves no CR or tab") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 2000; ++i) {
        const std::string x = random_text(rng, 30);
        const std::string once = normalize_text(x);
        REQUIRE(normalize_text(once) == once);
        REQUIRE(once.find('\r') == std::string::npos);
        REQUIRE(once.find('\t') == std::string::npos);
        REQUIRE(once.find("  ") == std::string::npos);
    }
}

TEST_CASE("split_documents examples") {
    const TokenId B = 9;
    auto tokens = [](const std::vector<TokenSequence>& docs) {
        std::vector<std::vector<TokenId>> out;
        for (const auto& d : docs) out.push_back(d.tokens);
        return out;
    };
    CHECK(tokens(split_documents(std::vector<TokenId>{5, 6, B, 7}, B)) == std::vector<std::vector<TokenId>>{{5, 6}, {7}});
    CHECK(split_documents(std::vector<TokenId>{B, B, B}, B).empty());
    CHECK(tokens(split_documents(std::vector<TokenId>{B, 1, B, 2, 3, B}, B)) ==
          std::vector<std::vector<TokenId>>{{1}, {2, 3}});
    CHECK(split_documents(std::vector<TokenId>{}, B).empty());
    const auto ids = split_documents(std::vector<TokenId>{1, B, 2}, B, 40);
    CHECK(ids[0].doc_id == 40);
    CHECK(ids[1].doc_id == 41);
}

TEST_CASE("split_documents round trip") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 500; ++i) {
        auto stream = oracle::random_tokens(rng, std::uniform_int_distribution<std::size_t>(0, 60)(rng), 4);
        const auto docs = split_documents(stream, 0);
        std::vector<TokenId> expect;
        // Input with empty runs removed: collapse boundary runs and trim the ends.
        for (std::size_t k = 0; k < stream.size(); ++k) {
            if (stream[k] == 0 && (expect.empty() || expect.back() == 0)) continue;
            expect.push_back(stream[k]);
        }
        if (!expect.empty() && expect.back() == 0) expect.pop_back();
        REQUIRE(join(docs, 0) == expect);
        for (const auto& d : docs) REQUIRE_FALSE(d.tokens.empty());
    }
}

TEST_CASE("token files round trip") {
    testutil::TempDir tmp;
    std::mt19937_64 rng(21);
    for (std::uint32_t vocab : {5u, 65536u, 70000u}) {
        for (int i = 0; i < 20; ++i) {
            std::vector<TokenSequence> docs;
            const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
            for (std::size_t d = 0; d < n; ++d) {
                auto t = oracle::random_tokens(rng, std::uniform_int_distribution<std::size_t>(1, 300)(rng), vocab - 1);
                docs.push_back(TokenSequence{d, std::move(t)});
            }
            const auto path = tmp.path / "r.tok";
            write_pretokenized(path, docs, vocab, vocab - 1);
            TokenFileHeader h;
            REQUIRE(load_pretokenized(path, &h) == docs);
            CHECK(h.token_width == (vocab <= 65536 ? 2u : 4u));
            CHECK(h.vocab_size == vocab);
        }
    }

    // Fixture: 3 documents, 10 tokens, with a reader buffer smaller than a document.
    const std::vector<TokenSequence> fixture{{0, {1, 2, 3}}, {1, {4, 5, 6, 7}}, {2, {1, 1, 2}}};
    write_pretokenized(tmp.path / "f.tok", fixture, 8, 0);
    TokenFileReader reader(tmp.path / "f.tok", 2);
    std::size_t docs = 0, tokens = 0;
    while (auto d = reader.next()) {
        ++docs;
        tokens += d->tokens.size();
    }
    CHECK(docs == 3);
    CHECK(tokens == 10);
    const auto stats = corpus_stats(fixture);
    CHECK(stats.num_documents == 3);
    CHECK(stats.num_tokens == 10);
    CHECK(stats.num_whitespace_words == 0);
}

TEST_CASE("token file errors carry offsets") {
    testutil::TempDir tmp;
    write_pretokenized(tmp.path / "ok.tok", std::vector<TokenSequence>{{0, {1, 2}}}, 300, 0);
    const std::string bytes = read_file(tmp.path / "ok.tok");
    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream(tmp.path / name, std::ios::binary) << content;
        return tmp.path / name;
    };
    auto offset_of = [](const std::filesystem::path& p) {
        try {
            load_pretokenized(p);
        } catch (const FormatError& e) {
            return e.offset();
        }
        return std::size_t(-1);
    };
    CHECK(load_pretokenized(write("empty.tok", bytes.substr(0, TokenFileHeader::kSize))).empty());
    CHECK_THROWS_AS(load_pretokenized(write("magic.tok", "XXXX" + bytes.substr(4))), FormatError);
    CHECK_THROWS_AS(load_pretokenized(write("short.tok", bytes.substr(0, 10))), FormatError);
    CHECK(offset_of(write("trunc.tok", bytes.substr(0, bytes.size() - 1))) == TokenFileHeader::kSize + 2);
    std::string big = bytes;
    big[TokenFileHeader::kSize + 2] = char(0xff);
    big[TokenFileHeader::kSize + 3] = char(0xff);
    CHECK(offset_of(write("big.tok", big)) == TokenFileHeader::kSize + 2);
    std::string width = bytes;
    width[8] = 3;
    CHECK_THROWS_AS(load_pretokenized(write("width.tok", width)), FormatError);
    CHECK_THROWS_AS(load_pretokenized(tmp.path / "missing.tok"), IoError);
}

TEST_CASE("whitespace tokenizer") {
    Vocabulary ab(std::unordered_map<std::string, TokenId>{{"a", 0}, {"b", 1}});
    CHECK(tokenize_whitespace("a b a", ab, VocabMode::closed).tokens == std::vector<TokenId>{0, 1, 0});

    Vocabulary a(std::unordered_map<std::string, TokenId>{{"a", 0}});
    CHECK(tokenize_whitespace("a c", a, VocabMode::open).tokens == std::vector<TokenId>{0, 1});

    Vocabulary empty;
    CHECK(tokenize_whitespace("hello world hello", empty, VocabMode::open).tokens == std::vector<TokenId>{0, 1, 0});
    CHECK(empty.word(1) == "world");

    // Fresh ids start after the largest id, not after the count.
    Vocabulary sparse(std::unordered_map<std::string, TokenId>{{"x", 7}});
    CHECK(tokenize_whitespace("y x\nz", sparse, VocabMode::open).tokens == std::vector<TokenId>{8, 7, 9});

    CHECK_THROWS_WITH_AS(tokenize_whitespace("a b zz", ab, VocabMode::closed),
                         doctest::Contains("'zz' at word index 2"), ConfigError);
    CHECK(count_whitespace_words("a b\n\nc ") == 3);
    CHECK(split_words(" a  b\nc") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("vocabulary and jsonl sources") {
    testutil::TempDir tmp;
    Vocabulary v;
    tokenize_whitespace("one two three two", v, VocabMode::open);
    v.save_json(tmp.path / "v.json");
    const auto back = Vocabulary::load_json(tmp.path / "v.json");
    CHECK(back.size() == 3);
    CHECK(*back.find("three") == 2);
    CHECK(back.word(1) == "two");

    std::ofstream(tmp.path / "t.jsonl") << "{\"text\": \"first doc\"}\n\n{\"text\": \"second\", \"x\": 1}\n";
    CHECK(read_jsonl_texts(tmp.path / "t.jsonl") == std::vector<std::string>{"first doc", "second"});
    std::ofstream(tmp.path / "bad.jsonl") << "{\"text\": \"ok\"}\n{\"body\": 1}\n";
    try {
        read_jsonl_texts(tmp.path / "bad.jsonl");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 2);
    }
}

}  // TEST_SUITE
