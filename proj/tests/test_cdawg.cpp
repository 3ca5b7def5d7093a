#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "leakscan/cdawg.hpp"
#include "leakscan/query.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace leakscan;

TEST_SUITE("cdawg") {

TEST_CASE("footnote example: matching lengths of l l o y d against hello world") {
    const auto docs = testutil::char_docs({"helloworld"});
    const auto index = CdawgIndex::build(docs);
    CHECK(index.contains(testutil::chars("llo")));
    CHECK_FALSE(index.contains(testutil::chars("lloy")));

    std::vector<std::uint32_t> got;
    MatchCursor c = index.start();
    for (TokenId t : testutil::chars("lloyd")) {
        c = index.step(c, t);
        got.push_back(c.length);
    }
    CHECK(got == std::vector<std::uint32_t>{1, 2, 3, 0, 1});
}

TEST_CASE("single one-token document accepts only that token") {
    const std::vector<TokenSequence> docs{{0, {7}}};
    const auto index = CdawgIndex::build(docs);
    CHECK(index.contains(std::vector<TokenId>{7}));
    CHECK_FALSE(index.contains(std::vector<TokenId>{7, 7}));
    CHECK_FALSE(index.contains(std::vector<TokenId>{3}));
    CHECK(index.factor_count(std::vector<TokenId>{7}) == 1);
}

TEST_CASE("accepted factors equal brute-force enumeration") {
    std::mt19937_64 rng(17);
    for (std::uint32_t alphabet : {2u, 3u, 5u}) {
        const std::vector<TokenSequence> docs{{0, oracle::random_tokens(rng, 200, alphabet)}};
        const auto index = CdawgIndex::build(docs);
        const auto factors = oracle::all_factors(docs);
        for (const auto& f : factors) REQUIRE(index.contains(f));
        // Every one-token extension of a factor that is not itself a factor must be rejected.
        std::size_t rejected = 0;
        for (const auto& f : factors) {
            auto g = f;
            for (TokenId t = 0; t <= alphabet; ++t) {
                g.push_back(t);
                if (!factors.count(g)) {
                    REQUIRE_FALSE(index.contains(g));
                    ++rejected;
                }
                g.pop_back();
            }
        }
        CHECK(rejected > 0);
    }
}

TEST_CASE("occurrence counts") {
    const auto abab = testutil::char_docs({"ababa"});
    const auto index = CdawgIndex::build(abab);
    CHECK(index.factor_count(testutil::chars("aba")) == 2);
    CHECK(index.factor_count(testutil::chars("a")) == 3);
    CHECK(index.factor_count(testutil::chars("bab")) == 1);
    CHECK(index.factor_count(testutil::chars("ab")) == 2);
    CHECK(index.factor_count(testutil::chars("ba")) == 2);
    CHECK(index.factor_count(testutil::chars("abc")) == 0);

    const auto aaa = CdawgIndex::build(testutil::char_docs({"aaa"}));
    CHECK(aaa.factor_count(testutil::chars("aa")) == 2);
    CHECK(aaa.factor_count(testutil::chars("aaa")) == 1);

    const auto ab = CdawgIndex::build(testutil::char_docs({"ab"}));
    CHECK(ab.factor_count(testutil::chars("ba")) == 0);
    CHECK(ab.factor_count(testutil::chars("a")) >= ab.factor_count(testutil::chars("ab")));
}

TEST_CASE("duplicate documents count every copy") {
    const auto index = CdawgIndex::build(testutil::char_docs({"abc", "abc", "xabcx"}));
    CHECK(index.factor_count(testutil::chars("abc")) == 3);
    CHECK(index.factor_count(testutil::chars("x")) == 2);
    CHECK(index.num_docs() == 3);
}

TEST_CASE("counts require annotation") {
    BuildOptions opts;
    opts.with_counts = false;
    const auto bare = CdawgIndex::build(testutil::char_docs({"abab"}), opts);
    CHECK_FALSE(bare.has_counts());
    CHECK_THROWS_AS(bare.factor_count(testutil::chars("ab")), CapabilityError);
    const auto counted = bare.annotate_counts();
    CHECK(counted.factor_count(testutil::chars("ab")) == 2);
}

TEST_CASE("matches never span document boundaries") {
    const std::vector<TokenSequence> docs{{0, {1}}, {1, {2}}};
    const auto index = CdawgIndex::build(docs);
    CHECK(matching_lengths(index, std::vector<TokenId>{1, 2}) == std::vector<std::uint32_t>{1, 1});
    CHECK_FALSE(index.contains(std::vector<TokenId>{1, 2}));
}

TEST_CASE("unknown tokens reset the match") {
    const auto index = CdawgIndex::build(testutil::char_docs({"abc"}));
    CHECK(matching_lengths(index, testutil::chars("abzc")) == std::vector<std::uint32_t>{1, 2, 0, 1});
    const auto full = testutil::chars("abc");
    CHECK(matching_lengths(index, full) == std::vector<std::uint32_t>{1, 2, 3});
}

TEST_CASE("build rejects bad input") {
    CHECK_THROWS_AS(CdawgIndex::build(std::vector<TokenSequence>{}), ConfigError);
    CHECK_THROWS_AS(CdawgIndex::build(std::vector<TokenSequence>{{0, {}}}), ConfigError);
    BuildOptions opts;
    opts.vocab_size = 4;
    CHECK_THROWS_AS(CdawgIndex::build(std::vector<TokenSequence>{{0, {1, 4}}}, opts), FormatError);
}

TEST_CASE("random corpora agree with the brute-force oracle") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 150; ++trial) {
        const std::uint32_t alphabet = std::uniform_int_distribution<std::uint32_t>(2, 256)(rng);
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 2000)(rng);
        const auto docs = oracle::random_corpus(rng, n, alphabet);
        const auto index = CdawgIndex::build(docs);
        REQUIRE(index.num_states() <= 2 * n + 2);
        REQUIRE(index.num_edges() <= 3 * n + 4);
        const auto q = oracle::random_query(rng, docs, 128, alphabet);
        const auto lengths = matching_lengths(index, q);
        REQUIRE(lengths == oracle::matching_lengths(docs, q));
        for (std::size_t i = 0; i < q.size(); ++i) {
            const std::span<const TokenId> f(q.data() + i + 1 - lengths[i], lengths[i]);
            REQUIRE(index.factor_count(f) == oracle::count(docs, f));
        }
        // Step growth bound.
        REQUIRE(lengths[0] <= 1);
        for (std::size_t i = 1; i < lengths.size(); ++i) REQUIRE(lengths[i] <= lengths[i - 1] + 1);
    }
}

TEST_CASE("save and load preserve answers") {
    testutil::TempDir tmp;
    const auto docs = testutil::char_docs({"helloworld"});
    const auto index = CdawgIndex::build(docs);
    const auto path = tmp.path / "fn2.cdwg";
    index.save(path);
    for (LoadMode mode : {LoadMode::in_memory, LoadMode::mapped}) {
        const auto back = CdawgIndex::load(path, mode);
        CHECK(back.is_mapped() == (mode == LoadMode::mapped));
        CHECK(back.has_counts());
        CHECK(matching_lengths(back, testutil::chars("lloyd")) == std::vector<std::uint32_t>{1, 2, 3, 0, 1});
        CHECK(back.factor_count(testutil::chars("l")) == 3);
        CHECK(back.num_states() == index.num_states());
        CHECK(back.vocab_size() == index.vocab_size());
    }

    const std::vector<TokenSequence> one{{0, {70000}}};
    const auto wide = CdawgIndex::build(one);
    wide.save(tmp.path / "one.cdwg");
    const auto wide_back = CdawgIndex::load(tmp.path / "one.cdwg");
    CHECK(wide_back.token_width() == 4);
    CHECK(wide_back.contains(std::vector<TokenId>{70000}));
}

TEST_CASE("disk-backed flag selects mapped loading") {
    testutil::TempDir tmp;
    BuildOptions opts;
    opts.disk_backed = true;
    const auto index = CdawgIndex::build(testutil::char_docs({"abcabd"}), opts);
    index.save(tmp.path / "m.cdwg");
    const auto back = CdawgIndex::load(tmp.path / "m.cdwg");
    CHECK(back.disk_backed());
    CHECK(back.is_mapped());
    CHECK(back.factor_count(testutil::chars("ab")) == 2);
    CHECK_FALSE(CdawgIndex::load(tmp.path / "m.cdwg", LoadMode::in_memory).is_mapped());
}

TEST_CASE("load errors name the failure") {
    testutil::TempDir tmp;
    const auto index = CdawgIndex::build(testutil::char_docs({"abcabd"}));
    const auto path = tmp.path / "x.cdwg";
    index.save(path);
    const std::string bytes = read_file(path);

    auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream(tmp.path / name, std::ios::binary) << content;
        return tmp.path / name;
    };
    auto kind_of = [](const std::filesystem::path& p) {
        try {
            CdawgIndex::load(p);
        } catch (const IndexLoadError& e) {
            return e.kind();
        }
        FAIL("expected IndexLoadError");
        return IndexLoadError::Kind::corrupt;
    };

    std::string v2 = bytes;
    v2[4] = 2;
    CHECK(kind_of(write("v2.cdwg", v2)) == IndexLoadError::Kind::version_mismatch);
    CHECK_THROWS_WITH_AS(CdawgIndex::load(tmp.path / "v2.cdwg"), doctest::Contains("version 2"), IndexLoadError);

    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x40;
    CHECK(kind_of(write("flip.cdwg", flipped)) == IndexLoadError::Kind::checksum);

    CHECK(kind_of(write("short.cdwg", bytes.substr(0, bytes.size() - 9))) == IndexLoadError::Kind::truncated);
    CHECK(kind_of(write("head.cdwg", bytes.substr(0, 30))) == IndexLoadError::Kind::truncated);
    CHECK(kind_of(write("magic.cdwg", "NOPE" + bytes.substr(4))) == IndexLoadError::Kind::bad_magic);
    CHECK_THROWS_AS(CdawgIndex::load(tmp.path / "missing.cdwg"), IoError);
}

TEST_CASE("round trip on a large random corpus answers queries identically") {
    testutil::TempDir tmp;
    std::mt19937_64 rng(99);
    const auto docs = oracle::random_corpus(rng, 200000, 50, 20);
    const auto index = CdawgIndex::build(docs);
    index.save(tmp.path / "big.cdwg");
    const auto back = CdawgIndex::load(tmp.path / "big.cdwg", LoadMode::mapped);
    for (int i = 0; i < 200; ++i) {
        const auto q = oracle::random_query(rng, docs, 64, 50);
        REQUIRE(matching_lengths(index, q) == matching_lengths(back, q));
        REQUIRE(index.factor_count(std::span(q).first(4)) == back.factor_count(std::span(q).first(4)));
    }
}

}  // TEST_SUITE
