#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace leakscan {

// Backoff n-gram model over whitespace words. All probabilities in the API
// are natural logs; ARPA files carry base-10 values and are converted on
// load and save.
class NgramModel {
public:
    static constexpr unsigned kDefaultOrder = 5;
    static constexpr double kDefaultDiscount = 0.75;
    static constexpr std::string_view kUnknown = "<unk>";

    // Interpolated absolute discounting, represented exactly as a backoff
    // model: stored probabilities are the interpolated ones and each
    // context's backoff weight is its interpolation mass D * N1+(h .) / c(h .).
    // Unigrams interpolate with a uniform distribution over the vocabulary
    // (unknown word included). No sentence padding is applied.
    static NgramModel estimate(std::span<const std::vector<std::string>> sentences,
                               unsigned order = kDefaultOrder, double discount = kDefaultDiscount);

    static NgramModel load_arpa(const std::filesystem::path& path);
    static NgramModel parse_arpa(std::istream& in, const std::string& source = "<stream>");
    void write_arpa(const std::filesystem::path& path) const;
    void write_arpa(std::ostream& out) const;

    unsigned order() const noexcept { return order_; }
    std::size_t num_ngrams(unsigned n) const { return tables_.at(n - 1).size(); }

    // ln P(word | context); only the last order-1 context words are used.
    double conditional_logprob(std::string_view word, std::span<const std::string> context) const;

    // Sum of conditional log probabilities, context truncated to order-1.
    double sequence_logprob(std::span<const std::string> words) const;

    // Every word with a unigram entry, the unknown symbol included when present.
    std::vector<std::string> vocabulary() const;

private:
    using WordId = std::uint32_t;

    struct Entry {
        double logprob = 0;  // natural log
        double backoff = 0;  // natural log, 0 when absent
        bool has_backoff = false;
    };

    static std::string key_of(std::span<const WordId> ids);
    WordId id_of(std::string_view word) const;
    WordId intern(std::string_view word);
    double logprob_ids(std::span<const WordId> context, WordId word) const;

    unsigned order_ = kDefaultOrder;
    std::unordered_map<std::string, WordId> ids_;
    std::vector<std::string> words_;
    WordId unk_ = kNoWord;
    // tables_[n-1] maps packed word ids of an n-gram to its entry.
    std::vector<std::unordered_map<std::string, Entry>> tables_;

    static constexpr WordId kNoWord = 0xffffffffu;
};

//------------------------------------------------------------------------------
// Chance of an overlap appearing somewhere in a corpus of n words

// Probability that a sequence of joint probability exp(log_prob) appears at
// least once among n_words positions: 1 - (1 - p)^n, clamped to [0, 1].
double appearance_probability(double log_prob, double n_words);

// ln p for the p at which appearance_probability equals alpha. Throws
// ConfigError unless n_words >= 1 and 0 < alpha < 1.
double chance_threshold(double n_words, double alpha);

struct ChanceAssessment {
    double log_prob = 0;
    double n_words = 0;
    double appear_prob = 0;
    bool improbable = false;  // appear_prob < alpha
};

ChanceAssessment assess_chance(double log_prob, double n_words, double alpha);

}  // namespace leakscan
