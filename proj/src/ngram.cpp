#include "leakscan/ngram.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "leakscan/error.hpp"

namespace leakscan {

namespace {

constexpr double kLn10 = 2.302585092994045684;
// ARPA convention for words absent from the model.
constexpr double kMissingLog10 = -100.0;

std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace

std::string NgramModel::key_of(std::span<const WordId> ids) {
    std::string key(ids.size() * sizeof(WordId), '\0');
    std::memcpy(key.data(), ids.data(), key.size());
    return key;
}

NgramModel::WordId NgramModel::id_of(std::string_view word) const {
    if (auto it = ids_.find(std::string(word)); it != ids_.end()) return it->second;
    return unk_;
}

NgramModel::WordId NgramModel::intern(std::string_view word) {
    auto [it, fresh] = ids_.try_emplace(std::string(word), static_cast<WordId>(words_.size()));
    if (fresh) {
        words_.emplace_back(word);
        if (word == kUnknown) unk_ = it->second;
    }
    return it->second;
}

//------------------------------------------------------------------------------
// Estimation

NgramModel NgramModel::estimate(std::span<const std::vector<std::string>> sentences, unsigned order,
                                double discount) {
    if (order < 1) throw ConfigError("n-gram order must be at least 1");
    if (!(discount > 0 && discount <= 1)) throw ConfigError("discount must lie in (0, 1]");

    NgramModel m;
    m.order_ = order;
    m.tables_.resize(order);

    std::vector<std::vector<WordId>> corpus;
    corpus.reserve(sentences.size());
    std::uint64_t total = 0;
    for (const auto& s : sentences) {
        auto& ids = corpus.emplace_back();
        for (const auto& w : s) ids.push_back(m.intern(w));
        total += s.size();
    }
    if (total == 0) throw ConfigError("cannot estimate an n-gram model from empty text");
    m.intern(kUnknown);

    // Raw counts of every order.
    std::vector<std::unordered_map<std::string, std::uint64_t>> counts(order);
    for (const auto& ids : corpus)
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (unsigned n = 1; n <= order && i + n <= ids.size(); ++n)
                ++counts[n - 1][key_of(std::span(ids).subspan(i, n))];

    // Unigrams: discounted counts interpolated with a uniform distribution.
    const double vocab = static_cast<double>(m.words_.size());
    const double n_total = static_cast<double>(total);
    const double uni_mass = discount * static_cast<double>(counts[0].size()) / n_total;
    for (WordId w = 0; w < m.words_.size(); ++w) {
        const auto key = key_of(std::span(&w, 1));
        const auto it = counts[0].find(key);
        const double c = it == counts[0].end() ? 0.0 : static_cast<double>(it->second);
        const double p = std::max(c - discount, 0.0) / n_total + uni_mass / vocab;
        m.tables_[0][key].logprob = std::log(p);
    }

    for (unsigned n = 2; n <= order; ++n) {
        // Continuation totals c(h .) and types N1+(h .) of each context.
        struct Context {
            std::uint64_t total = 0;
            std::uint64_t types = 0;
        };
        std::unordered_map<std::string, Context> contexts;
        const std::size_t ctx_bytes = (n - 1) * sizeof(WordId);
        for (const auto& [key, c] : counts[n - 1]) {
            auto& ctx = contexts[key.substr(0, ctx_bytes)];
            ctx.total += c;
            ++ctx.types;
        }
        for (const auto& [ctx_key, ctx] : contexts) {
            auto& entry = m.tables_[n - 2].at(ctx_key);
            entry.backoff = std::log(discount * double(ctx.types) / double(ctx.total));
            entry.has_backoff = true;
        }
        for (const auto& [key, c] : counts[n - 1]) {
            const auto& ctx = contexts.at(key.substr(0, ctx_bytes));
            const double gamma = discount * double(ctx.types) / double(ctx.total);
            // The (n-1)-gram suffix always occurs when the n-gram does.
            const double lower = std::exp(m.tables_[n - 2].at(key.substr(sizeof(WordId))).logprob);
            const double p = (double(c) - discount) / double(ctx.total) + gamma * lower;
            m.tables_[n - 1][key].logprob = std::log(p);
        }
    }
    return m;
}

//------------------------------------------------------------------------------
// Scoring

double NgramModel::logprob_ids(std::span<const WordId> context, WordId word) const {
    if (word == kNoWord) return kMissingLog10 * kLn10;
    const std::size_t max_ctx = std::min<std::size_t>(context.size(), order_ - 1);
    std::vector<WordId> gram(context.end() - max_ctx, context.end());
    gram.push_back(word);
    double backoff = 0;
    for (std::size_t k = max_ctx;; --k) {
        const std::span<const WordId> g(gram.data() + (max_ctx - k), k + 1);
        if (auto it = tables_[k].find(key_of(g)); it != tables_[k].end()) return backoff + it->second.logprob;
        if (k == 0) return backoff + kMissingLog10 * kLn10;
        if (auto it = tables_[k - 1].find(key_of(g.first(k))); it != tables_[k - 1].end())
            backoff += it->second.backoff;
    }
}

double NgramModel::conditional_logprob(std::string_view word, std::span<const std::string> context) const {
    std::vector<WordId> ctx;
    ctx.reserve(context.size());
    for (const auto& w : context) ctx.push_back(id_of(w));
    return logprob_ids(ctx, id_of(word));
}

double NgramModel::sequence_logprob(std::span<const std::string> words) const {
    std::vector<WordId> ids;
    ids.reserve(words.size());
    for (const auto& w : words) ids.push_back(id_of(w));
    double total = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::size_t ctx = std::min<std::size_t>(i, order_ - 1);
        total += logprob_ids(std::span(ids).subspan(i - ctx, ctx), ids[i]);
    }
    return total;
}

std::vector<std::string> NgramModel::vocabulary() const {
    std::vector<std::string> out;
    for (const auto& [key, e] : tables_[0]) {
        WordId id;
        std::memcpy(&id, key.data(), sizeof id);
        out.push_back(words_[id]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

//------------------------------------------------------------------------------
// ARPA

void NgramModel::write_arpa(std::ostream& out) const {
    out << "\n\\data\\\n";
    for (unsigned n = 1; n <= order_; ++n) out << "ngram " << n << '=' << tables_[n - 1].size() << '\n';
    for (unsigned n = 1; n <= order_; ++n) {
        out << "\n\\" << n << "-grams:\n";
        // Sorted by word strings so output is deterministic.
        std::map<std::vector<std::string_view>, const Entry*> sorted;
        for (const auto& [key, e] : tables_[n - 1]) {
            std::vector<std::string_view> ws(n);
            for (unsigned i = 0; i < n; ++i) {
                WordId id;
                std::memcpy(&id, key.data() + i * sizeof(WordId), sizeof id);
                ws[i] = words_[id];
            }
            sorted.emplace(std::move(ws), &e);
        }
        for (const auto& [ws, e] : sorted) {
            out << format_double(e->logprob / kLn10);
            for (std::size_t i = 0; i < ws.size(); ++i) out << (i == 0 ? '\t' : ' ') << ws[i];
            if (e->has_backoff) out << '\t' << format_double(e->backoff / kLn10);
            out << '\n';
        }
    }
    out << "\n\\end\\\n";
}

void NgramModel::write_arpa(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write ARPA file " + path.string());
    write_arpa(f);
    if (!f) throw IoError("write failed for " + path.string());
}

NgramModel NgramModel::load_arpa(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open ARPA file " + path.string());
    return parse_arpa(f, path.string());
}

NgramModel NgramModel::parse_arpa(std::istream& in, const std::string& source) {
    std::string line;
    std::uint64_t lineno = 0;
    auto fail = [&](const std::string& what) -> FormatError {
        return FormatError(source + ":" + std::to_string(lineno) + ": " + what, lineno);
    };
    auto next_nonblank = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") != std::string::npos) return true;
        }
        return false;
    };
    auto parse_double = [&](std::string_view s) {
        double v;
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || end != s.data() + s.size()) throw fail("bad number '" + std::string(s) + "'");
        return v;
    };

    if (!next_nonblank() || line != "\\data\\") throw fail("expected \\data\\ header");

    std::vector<std::uint64_t> declared;
    while (next_nonblank() && line.rfind("ngram ", 0) == 0) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw fail("malformed ngram count line");
        const unsigned n = static_cast<unsigned>(parse_double(line.substr(6, eq - 6)));
        if (n != declared.size() + 1) throw fail("ngram counts out of order");
        declared.push_back(static_cast<std::uint64_t>(parse_double(line.substr(eq + 1))));
    }
    if (declared.empty()) throw fail("no ngram counts in \\data\\ section");

    NgramModel m;
    m.order_ = static_cast<unsigned>(declared.size());
    m.tables_.resize(m.order_);

    for (unsigned n = 1; n <= m.order_; ++n) {
        if (line != "\\" + std::to_string(n) + "-grams:")
            throw fail("expected \\" + std::to_string(n) + "-grams: section header");
        std::uint64_t seen = 0;
        bool more = false;
        while ((more = next_nonblank()) && line.front() != '\\') {
            std::vector<std::string_view> fields;
            std::string_view rest = line;
            while (!rest.empty()) {
                const auto b = rest.find_first_not_of(" \t");
                if (b == std::string_view::npos) break;
                rest.remove_prefix(b);
                const auto e = rest.find_first_of(" \t");
                fields.push_back(rest.substr(0, e));
                rest.remove_prefix(e == std::string_view::npos ? rest.size() : e);
            }
            if (fields.size() != n + 1 && fields.size() != n + 2)
                throw fail("expected " + std::to_string(n) + " words in " + std::to_string(n) + "-gram entry");
            Entry e;
            e.logprob = parse_double(fields[0]) * kLn10;
            if (fields.size() == n + 2) {
                e.backoff = parse_double(fields[n + 1]) * kLn10;
                e.has_backoff = true;
            }
            std::vector<WordId> ids;
            for (unsigned i = 1; i <= n; ++i) ids.push_back(m.intern(fields[i]));
            if (!m.tables_[n - 1].emplace(key_of(ids), e).second) throw fail("duplicate n-gram");
            ++seen;
        }
        if (seen != declared[n - 1])
            throw fail(std::to_string(n) + "-gram count mismatch: declared " + std::to_string(declared[n - 1]) +
                       ", found " + std::to_string(seen));
        if (!more) throw fail("missing \\end\\");
    }
    if (line != "\\end\\") throw fail("expected \\end\\");
    return m;
}

//------------------------------------------------------------------------------
// Chance model

double appearance_probability(double log_prob, double n_words) {
    if (std::isinf(log_prob) && log_prob < 0) return 0.0;
    if (log_prob >= 0) return 1.0;
    const double p = std::exp(log_prob);
    const double q = -std::expm1(n_words * std::log1p(-p));
    return std::clamp(q, 0.0, 1.0);
}

double chance_threshold(double n_words, double alpha) {
    if (!(n_words >= 1)) throw ConfigError("corpus word count must be at least 1");
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie strictly between 0 and 1");
    // p = 1 - (1 - alpha)^(1/n), without cancellation for large n.
    return std::log(-std::expm1(std::log1p(-alpha) / n_words));
}

ChanceAssessment assess_chance(double log_prob, double n_words, double alpha) {
    ChanceAssessment a;
    a.log_prob = log_prob;
    a.n_words = n_words;
    a.appear_prob = appearance_probability(log_prob, n_words);
    a.improbable = a.appear_prob < alpha;
    return a;
}

}  // namespace leakscan
