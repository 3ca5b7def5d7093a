#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "leakscan/error.hpp"
#include "leakscan/ngram.hpp"
#include "test_util.hpp"

using namespace leakscan;

namespace {

using Words = std::vector<std::string>;

// Interpolated absolute discounting evaluated straight from raw counts.
class DirectInterpolation {
public:
    DirectInterpolation(const std::vector<Words>& corpus, unsigned order, double d) : order_(order), d_(d) {
        for (const auto& s : corpus)
            for (std::size_t i = 0; i < s.size(); ++i) {
                ++total_;
                vocab_.insert(s[i]);
                for (unsigned n = 1; n <= order && i + n <= s.size(); ++n) {
                    Words g(s.begin() + i, s.begin() + i + n);
                    ++counts_[g];
                    if (n >= 2) {
                        Words h(g.begin(), g.end() - 1);
                        ctx_total_[h] += 1;
                    }
                }
            }
        vocab_.insert("<unk>");
        for (const auto& [g, c] : counts_)
            if (g.size() >= 2) ++ctx_types_[Words(g.begin(), g.end() - 1)];
    }

    double prob(const std::string& w_in, Words h) const {
        const std::string w = vocab_.count(w_in) ? w_in : "<unk>";
        if (h.size() > order_ - 1) h.erase(h.begin(), h.end() - (order_ - 1));
        for (auto& x : h)
            if (!vocab_.count(x)) x = "<unk>";
        if (h.empty()) {
            const double types = double(count_types(1));
            const double c = count({w});
            return std::max(c - d_, 0.0) / total_ + d_ * types / total_ / double(vocab_.size());
        }
        const Words lower_ctx(h.begin() + 1, h.end());
        const double lower = prob(w, lower_ctx);
        const auto it = ctx_total_.find(h);
        if (it == ctx_total_.end()) return lower;
        Words hw = h;
        hw.push_back(w);
        const double c = count(hw);
        const double types = double(ctx_types_.at(h));
        return std::max(c - d_, 0.0) / it->second + d_ * types / it->second * lower;
    }

    const std::set<std::string>& vocab() const { return vocab_; }

private:
    double count(const Words& g) const {
        auto it = counts_.find(g);
        return it == counts_.end() ? 0.0 : double(it->second);
    }
    std::size_t count_types(unsigned n) const {
        std::size_t k = 0;
        for (const auto& [g, c] : counts_) k += g.size() == n;
        return k;
    }

    unsigned order_;
    double d_;
    double total_ = 0;
    std::set<std::string> vocab_;
    std::map<Words, std::uint64_t> counts_;
    std::map<Words, double> ctx_total_;
    std::map<Words, std::uint64_t> ctx_types_;
};

std::vector<Words> random_text(std::mt19937_64& rng, std::size_t sentences, std::size_t vocab) {
    std::vector<Words> out(sentences);
    std::uniform_int_distribution<std::size_t> len(1, 12), w(0, vocab - 1);
    for (auto& s : out) {
        const std::size_t n = len(rng);
        for (std::size_t i = 0; i < n; ++i) s.push_back("w" + std::to_string(w(rng) * w(rng) % vocab));
    }
    return out;
}

}  // namespace

TEST_SUITE("ngram") {

TEST_CASE("unigram distribution is normalized and ordered by count") {
    const std::vector<Words> ab{{"a", "b"}};
    const auto m = NgramModel::estimate(ab, 1);
    const double total = std::exp(m.conditional_logprob("a", {})) + std::exp(m.conditional_logprob("b", {})) +
                         std::exp(m.conditional_logprob("<unk>", {}));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<Words> aab{{"a", "a", "b"}};
    const auto m2 = NgramModel::estimate(aab, 3);
    CHECK(m2.conditional_logprob("a", {}) > m2.conditional_logprob("b", {}));
}

TEST_CASE("hand-computed absolute discounting on a tiny corpus") {
    // Corpus "a b a", order 2, D = 0.75, vocabulary {a, b, <unk>}.
    // Unigrams: mass = 0.75*2/3 = 0.5; P(a) = 1.25/3 + 0.5/3 = 7/12,
    // P(b) = 0.25/3 + 0.5/3 = 1/4, P(<unk>) = 0.5/3 = 1/6.
    // Bigrams: c(a .) = 1, gamma(a) = 0.75: P(b|a) = 0.25 + 0.75/4 = 0.4375,
    // P(a|a) = 0.75 * 7/12 = 0.4375, P(<unk>|a) = 0.75/6 = 0.125.
    // c(b .) = 1: P(a|b) = 0.25 + 0.75 * 7/12 = 0.6875.
    const std::vector<Words> corpus{{"a", "b", "a"}};
    const auto m = NgramModel::estimate(corpus, 2);
    auto p = [&](const std::string& w, Words ctx) { return std::exp(m.conditional_logprob(w, ctx)); };
    CHECK(std::abs(p("a", {}) - 7.0 / 12) < 1e-9);
    CHECK(std::abs(p("b", {}) - 0.25) < 1e-9);
    CHECK(std::abs(p("<unk>", {}) - 1.0 / 6) < 1e-9);
    CHECK(std::abs(p("zzz", {}) - 1.0 / 6) < 1e-9);
    CHECK(std::abs(p("b", {"a"}) - 0.4375) < 1e-9);
    CHECK(std::abs(p("a", {"a"}) - 0.4375) < 1e-9);
    CHECK(std::abs(p("<unk>", {"a"}) - 0.125) < 1e-9);
    CHECK(std::abs(p("a", {"b"}) - 0.6875) < 1e-9);

    // Three-word query: ln(7/12) + ln(0.4375) + ln(0.6875).
    const Words q{"a", "b", "a"};
    CHECK(std::abs(m.sequence_logprob(q) - (-1.7403685233585655)) < 1e-9);
}

TEST_CASE("estimator matches direct interpolation and is normalized") {
    std::mt19937_64 rng(7);
    const auto text = random_text(rng, 300, 40);
    const auto model = NgramModel::estimate(text, 5);
    const DirectInterpolation direct(text, 5, 0.75);
    const Words vocab(direct.vocab().begin(), direct.vocab().end());
    CHECK(model.vocabulary() == vocab);

    std::uniform_int_distribution<std::size_t> pick(0, text.size() - 1), clen(0, 5);
    for (int trial = 0; trial < 1000; ++trial) {
        // Contexts drawn from real text (seen) or random words (mostly unseen).
        Words ctx;
        const std::size_t len = clen(rng);
        if (trial % 2 == 0) {
            const auto& s = text[pick(rng)];
            const std::size_t start = std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng);
            for (std::size_t i = start; i < s.size() && ctx.size() < len; ++i) ctx.push_back(s[i]);
        } else {
            for (std::size_t i = 0; i < len; ++i) ctx.push_back(vocab[pick(rng) % vocab.size()]);
        }
        double sum = 0;
        for (const auto& w : vocab) {
            const double p = std::exp(model.conditional_logprob(w, ctx));
            if (trial < 100) REQUIRE(std::abs(p - direct.prob(w, ctx)) < 1e-9);
            sum += p;
        }
        REQUIRE(std::abs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("sequence log probability never increases with extension") {
    std::mt19937_64 rng(11);
    const auto text = random_text(rng, 100, 25);
    const auto model = NgramModel::estimate(text, 5);
    for (const auto& s : text) {
        double prev = 0;
        for (std::size_t k = 1; k <= s.size(); ++k) {
            const double lp = model.sequence_logprob(std::span(s).first(k));
            REQUIRE(lp <= prev);
            prev = lp;
        }
    }
    CHECK(model.sequence_logprob({}) == 0.0);
    const Words one{"w1"};
    CHECK(model.sequence_logprob(one) == model.conditional_logprob("w1", {}));
}

TEST_CASE("estimate rejects bad parameters") {
    const std::vector<Words> corpus{{"a"}};
    CHECK_THROWS_AS(NgramModel::estimate(corpus, 0), ConfigError);
    CHECK_THROWS_AS(NgramModel::estimate(std::vector<Words>{}, 3), ConfigError);
}

TEST_CASE("ARPA with one unigram") {
    std::istringstream in("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\tonly\n\n\\end\\\n");
    const auto m = NgramModel::parse_arpa(in);
    CHECK(m.order() == 1);
    CHECK(m.conditional_logprob("only", {}) == doctest::Approx(-0.5 * std::log(10.0)).epsilon(1e-15));
}

TEST_CASE("ARPA backoff to unigram") {
    std::istringstream in(
        "\\data\\\n"
        "ngram 1=3\n"
        "ngram 2=1\n"
        "\n\\1-grams:\n"
        "-1.0\t<unk>\n"
        "-0.5\ta\t-0.3\n"
        "-0.4\tb\t-0.2\n"
        "\n\\2-grams:\n"
        "-0.1\tb a\n"
        "\n\\end\\\n");
    const auto m = NgramModel::parse_arpa(in);
    const double ln10 = std::log(10.0);
    const Words a{"a"}, b{"b"};
    // (a, b) is absent: log_backoff(a) + logP(b).
    CHECK(std::abs(m.conditional_logprob("b", a) - (-0.3 - 0.4) * ln10) < 1e-12);
    CHECK(std::abs(m.conditional_logprob("a", b) - (-0.1) * ln10) < 1e-12);
    // Unknown word maps to <unk> after backing off from context "a".
    CHECK(std::abs(m.conditional_logprob("q", a) - (-0.3 - 1.0) * ln10) < 1e-12);
    // "b a b": P(b) P(a|b) P(b|a)
    const Words bab{"b", "a", "b"};
    CHECK(std::abs(m.sequence_logprob(bab) - (-0.4 - 0.1 - 0.3 - 0.4) * ln10) < 1e-12);
}

TEST_CASE("ARPA written by the estimator reloads with identical scores") {
    testutil::TempDir tmp;
    std::mt19937_64 rng(5);
    const auto text = random_text(rng, 200, 30);
    const auto model = NgramModel::estimate(text, 5);
    model.write_arpa(tmp.path / "m.arpa");
    const auto back = NgramModel::load_arpa(tmp.path / "m.arpa");
    CHECK(back.order() == 5);
    for (unsigned n = 1; n <= 5; ++n) CHECK(back.num_ngrams(n) == model.num_ngrams(n));
    std::uniform_int_distribution<std::size_t> pick(0, text.size() - 1);
    for (int i = 0; i < 100; ++i) {
        Words q = text[pick(rng)];
        if (i % 3 == 0) q.push_back("never-seen");
        REQUIRE(std::abs(back.sequence_logprob(q) - model.sequence_logprob(q)) < 1e-12);
    }
}

TEST_CASE("ARPA parse errors carry line numbers") {
    auto line_of = [](const std::string& text) -> std::uint64_t {
        std::istringstream in(text);
        try {
            NgramModel::parse_arpa(in);
        } catch (const FormatError& e) {
            return e.offset();
        }
        return 0;
    };
    CHECK(line_of("junk\n") == 1);
    CHECK(line_of("\\data\\\nngram 1=2\n\n\\1-grams:\n-1 a\n\n\\end\\\n") == 7);
    CHECK(line_of("\\data\\\nngram 1=1\n\n\\2-grams:\n-1 a\n\\end\\\n") == 4);
    CHECK(line_of("\\data\\\nngram 1=1\n\n\\1-grams:\n-1 a b\n\\end\\\n") == 5);
    CHECK(line_of("\\data\\\nngram 1=1\n\n\\1-grams:\n-1 a\n") == 5);
    CHECK(line_of("\\data\\\nngram 1=1\n\n\\1-grams:\nx a\n\\end\\\n") == 5);
}

TEST_CASE("appearance probability") {
    CHECK(appearance_probability(-INFINITY, 1e9) == 0.0);
    CHECK(appearance_probability(std::log(0.3), 1) == doctest::Approx(0.3).epsilon(1e-14));
    // 1 - 0.99^100
    CHECK(std::abs(appearance_probability(std::log(0.01), 100) - 0.6339676587267709) < 1e-12);
    CHECK(appearance_probability(0.0, 10) == 1.0);
    // Monotone in both arguments.
    CHECK(appearance_probability(-20, 1e6) < appearance_probability(-19, 1e6));
    CHECK(appearance_probability(-20, 1e6) < appearance_probability(-20, 1e7));
}

TEST_CASE("chance threshold") {
    CHECK(std::abs(chance_threshold(1, 0.05) - std::log(0.05)) < 1e-12);
    CHECK(std::abs(chance_threshold(1, 0.05) - (-2.9957)) < 1e-4);
    // Word counts implied by inverting the published thresholds.
    CHECK(std::abs(chance_threshold(5.13e9, 0.05) - (-25.33)) <= 0.01);
    CHECK(std::abs(chance_threshold(1.78e11, 0.05) - (-28.87)) <= 0.01);
    for (double n = 1; n <= 1e12; n *= 10) {
        REQUIRE(std::abs(appearance_probability(chance_threshold(n, 0.05), n) - 0.05) < 1e-9);
        REQUIRE(std::abs(appearance_probability(chance_threshold(n, 0.2), n) - 0.2) < 1e-9);
    }
    CHECK_THROWS_AS(chance_threshold(0.5, 0.05), ConfigError);
    CHECK_THROWS_AS(chance_threshold(100, 0.0), ConfigError);
    CHECK_THROWS_AS(chance_threshold(100, 1.0), ConfigError);

    const auto a = assess_chance(-30, 5.13e9, 0.05);
    CHECK(a.improbable);
    CHECK_FALSE(assess_chance(-20, 5.13e9, 0.05).improbable);
}

}  // TEST_SUITE
