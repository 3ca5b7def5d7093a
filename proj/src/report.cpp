#include "leakscan/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "leakscan/error.hpp"
#include "parallel.hpp"

namespace leakscan {

namespace fs = std::filesystem;

namespace {

Passage text_passage(std::string id, std::string_view raw, const Vocabulary* vocab) {
    if (!vocab) throw ConfigError("text passage " + id + " needs a vocabulary to tokenize");
    Passage p;
    p.id = std::move(id);
    const std::string text = normalize_text(raw);
    p.words = split_words(text);
    // Unknown words get fresh ids past the index vocabulary and never match.
    Vocabulary scratch = *vocab;
    p.tokens = tokenize_whitespace(text, scratch, VocabMode::open).tokens;
    p.token_word.resize(p.tokens.size());
    for (std::uint32_t i = 0; i < p.token_word.size(); ++i) p.token_word[i] = i;
    return p;
}

void merge_vocab(PassageSet& into, std::uint32_t declared, const fs::path& source) {
    if (declared == 0) return;
    if (into.vocab_size != 0 && into.vocab_size != declared)
        throw ConfigError("passages in " + source.string() + " declare vocabulary size " + std::to_string(declared) +
                          ", others declare " + std::to_string(into.vocab_size));
    into.vocab_size = declared;
}

void load_jsonl_passages(const fs::path& path, const Vocabulary* vocab, PassageSet& out) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + " line " + std::to_string(lineno) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw FormatError(where + "invalid JSON", lineno);
        }
        try {
            out.passages.push_back(passage_from_json(j, path.stem().string() + "#" + std::to_string(lineno - 1), vocab));
        } catch (const FormatError& e) {
            throw FormatError(where + e.what(), lineno);
        }
        if (!j.contains("tokens")) merge_vocab(out, vocab->size_bound(), path);
    }
}

void load_file(const fs::path& path, const Vocabulary* vocab, PassageSet& out) {
    const std::string ext = path.extension().string();
    if (ext == ".txt") {
        out.passages.push_back(text_passage(path.stem().string(), read_file(path), vocab));
        merge_vocab(out, vocab->size_bound(), path);
    } else if (ext == ".tok") {
        TokenFileReader reader(path);
        merge_vocab(out, reader.header().vocab_size, path);
        std::size_t k = 0;
        while (auto doc = reader.next())
            out.passages.push_back(Passage{path.stem().string() + "#" + std::to_string(k++), std::move(doc->tokens), {}, {}});
    } else if (ext == ".jsonl") {
        load_jsonl_passages(path, vocab, out);
    } else {
        throw ConfigError("unsupported passage file " + path.string() + " (expected .txt, .tok or .jsonl)");
    }
}

std::string join_words(std::span<const std::string> words) {
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) s += ' ';
        s += words[i];
    }
    return s;
}

void check_compatible(const CdawgIndex& index, const PassageSet& passages) {
    if (!index.has_counts()) throw CapabilityError("index has no occurrence counts; rebuild with counts");
    if (passages.vocab_size != 0 && index.vocab_size() != 0 && passages.vocab_size != index.vocab_size())
        throw ConfigError("passages were tokenized with a vocabulary of size " + std::to_string(passages.vocab_size) +
                          " but the index declares " + std::to_string(index.vocab_size()));
}

void check_options(const AnalyzeOptions& options) {
    if (!options.chance) return;
    if (!options.chance->model) throw ConfigError("chance assessment requested without an n-gram model");
    if (!(options.chance->n_words >= 1))
        throw ConfigError("chance assessment needs the corpus whitespace-word count (at least 1)");
    if (!(options.chance->alpha > 0 && options.chance->alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
}

std::vector<OverlapRecord> finish(std::vector<OverlapRecord> records) {
    std::stable_sort(records.begin(), records.end(), [](const OverlapRecord& a, const OverlapRecord& b) {
        return std::tie(a.corpus_id, a.passage_id) < std::tie(b.corpus_id, b.passage_id);
    });
    return records;
}

}  // namespace

Passage passage_from_json(const nlohmann::json& j, std::string default_id, const Vocabulary* vocab) {
    if (!j.is_object()) throw FormatError("passage record is not an object");
    std::string id = std::move(default_id);
    if (j.contains("id")) id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    try {
        if (j.contains("tokens")) {
            Passage p;
            p.id = std::move(id);
            p.tokens = j["tokens"].get<std::vector<TokenId>>();
            if (j.contains("words")) {
                p.words = j["words"].get<std::vector<std::string>>();
                p.token_word = j.at("token_word").get<std::vector<std::uint32_t>>();
                if (p.token_word.size() != p.tokens.size()) throw FormatError("token_word length differs from tokens");
                for (std::size_t i = 0; i < p.token_word.size(); ++i)
                    if (p.token_word[i] >= p.words.size() || (i > 0 && p.token_word[i] < p.token_word[i - 1]))
                        throw FormatError("token_word must be non-decreasing word indices");
            }
            return p;
        }
        if (j.contains("text") && j["text"].is_string()) return text_passage(std::move(id), j["text"].get<std::string>(), vocab);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(e.what());
    }
    throw FormatError("record needs a \"tokens\" array or a \"text\" string");
}

PassageSet load_passages(const fs::path& path, const Vocabulary* vocab) {
    PassageSet out;
    std::error_code ec;
    if (fs::is_directory(path, ec)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            const auto ext = entry.path().extension();
            if (entry.is_regular_file() && (ext == ".txt" || ext == ".tok" || ext == ".jsonl"))
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw ConfigError("no .txt, .tok or .jsonl passages in " + path.string());
        for (const auto& f : files) load_file(f, vocab, out);
    } else if (fs::exists(path, ec)) {
        load_file(path, vocab, out);
    } else {
        throw IoError("passage path " + path.string() + " does not exist");
    }
    return out;
}

OverlapRecord make_record(const OverlapResult& result, const Passage& passage, const AnalyzeOptions& options) {
    OverlapRecord r;
    r.corpus_id = options.corpus_id;
    r.passage_id = passage.id;
    r.passage_len = result.passage_len;
    r.overlap_len = result.max_len;
    const OverlapSequence* best = result.best();
    if (best) {
        r.overlap_frequency = result.max_frequency;
        r.overlap_token_ids = best->tokens;
    }

    const Vocabulary* detok = options.detokenizer;
    if (detok) {
        std::vector<std::string> words;
        bool complete = true;
        for (TokenId t : r.overlap_token_ids) {
            const auto w = detok->word(t);
            complete = complete && !w.empty();
            words.emplace_back(w);
        }
        if (complete) r.overlap_text = join_words(words);
    }

    if (!options.chance) return r;

    // Word forms: the passage's own, else one word per token via the detokenizer.
    std::vector<std::string> own_words;
    std::vector<std::uint32_t> own_map;
    const std::vector<std::string>* words = &passage.words;
    const std::vector<std::uint32_t>* token_word = &passage.token_word;
    if (passage.token_word.size() != passage.tokens.size() || passage.words.empty()) {
        if (!detok) return r;
        for (TokenId t : passage.tokens) {
            const auto w = detok->word(t);
            if (w.empty()) return r;
            own_map.push_back(static_cast<std::uint32_t>(own_words.size()));
            own_words.emplace_back(w);
        }
        words = &own_words;
        token_word = &own_map;
    }

    double log_prob = 0;
    bool partial = false;
    if (best && r.overlap_len > 0) {
        const std::uint32_t e = best->end_positions.front();
        const std::uint32_t s = e + 1 - r.overlap_len;
        const auto& tw = *token_word;
        const std::uint32_t w0 = tw[s], w1 = tw[e];
        partial = (s > 0 && tw[s - 1] == w0) || (e + 1 < tw.size() && tw[e + 1] == w1);
        log_prob = options.chance->model->sequence_logprob(std::span(*words).subspan(w0, w1 - w0 + 1));
    }
    const auto a = assess_chance(log_prob, options.chance->n_words, options.chance->alpha);
    r.ngram_log_prob = a.log_prob;
    r.appear_prob = a.appear_prob;
    r.improbable = a.improbable;
    r.partial_word = partial;
    return r;
}

std::vector<OverlapRecord> analyze(std::span<const CdawgIndex> indexes, const PassageSet& passages,
                                   const AnalyzeOptions& options) {
    if (indexes.empty()) throw ConfigError("no index to analyze against");
    for (const auto& index : indexes) check_compatible(index, passages);
    check_options(options);
    const auto& ps = passages.passages;
    std::vector<OverlapRecord> records(ps.size());
    const unsigned workers = options.workers ? options.workers : detail::default_workers();
    detail::parallel_for(ps.size(), workers, [&](std::size_t i) {
        std::vector<OverlapResult> parts;
        for (const auto& index : indexes) parts.push_back(longest_overlap(index, ps[i].tokens, ps[i].id));
        const OverlapResult merged = parts.size() == 1 ? std::move(parts.front()) : merge_overlaps(parts);
        records[i] = make_record(merged, ps[i], options);
    });
    return finish(std::move(records));
}

std::vector<OverlapRecord> analyze(const CdawgIndex& index, const PassageSet& passages, const AnalyzeOptions& options) {
    return analyze(std::span(&index, 1), passages, options);
}

std::vector<OverlapRecord> analyze_index_files(std::span<const fs::path> paths, const PassageSet& passages,
                                               const AnalyzeOptions& options) {
    if (paths.empty()) throw ConfigError("no index to analyze against");
    check_options(options);
    const auto& ps = passages.passages;
    const unsigned workers = options.workers ? options.workers : detail::default_workers();
    std::vector<std::vector<OverlapResult>> parts(ps.size());
    for (const auto& path : paths) {
        const auto index = CdawgIndex::load(path);
        check_compatible(index, passages);
        detail::parallel_for(ps.size(), workers, [&](std::size_t i) {
            parts[i].push_back(longest_overlap(index, ps[i].tokens, ps[i].id));
        });
    }
    std::vector<OverlapRecord> records(ps.size());
    detail::parallel_for(ps.size(), workers, [&](std::size_t i) {
        records[i] = make_record(merge_overlaps(parts[i]), ps[i], options);
    });
    return finish(std::move(records));
}

//------------------------------------------------------------------------------
// Serialization

nlohmann::ordered_json to_json(const OverlapRecord& r) {
    nlohmann::ordered_json j;
    j["corpus_id"] = r.corpus_id;
    j["passage_id"] = r.passage_id;
    j["passage_len"] = r.passage_len;
    j["overlap_len"] = r.overlap_len;
    j["overlap_frequency"] = r.overlap_frequency;
    j["overlap_token_ids"] = r.overlap_token_ids;
    if (r.overlap_text) j["overlap_text"] = *r.overlap_text;
    if (r.ngram_log_prob) j["ngram_log_prob"] = *r.ngram_log_prob;
    if (r.appear_prob) j["appear_prob"] = *r.appear_prob;
    if (r.improbable) j["improbable"] = *r.improbable;
    if (r.partial_word) j["partial_word"] = *r.partial_word;
    return j;
}

OverlapRecord record_from_json(const nlohmann::json& j) {
    OverlapRecord r;
    try {
        r.corpus_id = j.at("corpus_id").get<std::string>();
        r.passage_id = j.at("passage_id").get<std::string>();
        r.passage_len = j.at("passage_len").get<std::uint32_t>();
        r.overlap_len = j.at("overlap_len").get<std::uint32_t>();
        r.overlap_frequency = j.at("overlap_frequency").get<std::uint64_t>();
        r.overlap_token_ids = j.at("overlap_token_ids").get<std::vector<TokenId>>();
        if (j.contains("overlap_text")) r.overlap_text = j["overlap_text"].get<std::string>();
        if (j.contains("ngram_log_prob")) r.ngram_log_prob = j["ngram_log_prob"].get<double>();
        if (j.contains("appear_prob")) r.appear_prob = j["appear_prob"].get<double>();
        if (j.contains("improbable")) r.improbable = j["improbable"].get<bool>();
        if (j.contains("partial_word")) r.partial_word = j["partial_word"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad overlap record: ") + e.what());
    }
    if (r.overlap_len > r.passage_len) throw FormatError("overlap_len exceeds passage_len in " + r.passage_id);
    return r;
}

std::string to_jsonl(std::span<const OverlapRecord> records) {
    std::string out;
    for (const auto& r : records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

void emit_jsonl(std::span<const OverlapRecord> records, const fs::path& path) {
    if (records.empty()) throw ConfigError("no records to write");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << to_jsonl(records);
    if (!f) throw IoError("write failed for " + path.string());
}

std::vector<OverlapRecord> read_jsonl_records(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<OverlapRecord> out;
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error&) {
            throw FormatError(path.string() + ": invalid JSON on line " + std::to_string(lineno), lineno);
        }
    }
    return out;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

std::string fixed2(const std::optional<double>& v) {
    if (!v) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return buf;
}

std::string flag(const std::optional<bool>& v) { return v ? (*v ? "true" : "false") : ""; }

}  // namespace

void emit_figure_data(std::span<const OverlapRecord> records, const fs::path& dir) {
    if (records.empty()) throw ConfigError("no records to write");
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream f1(dir / "figure1.csv", std::ios::binary | std::ios::trunc);
    std::ofstream f2(dir / "figure2.csv", std::ios::binary | std::ios::trunc);
    if (!f1 || !f2) throw IoError("cannot write figure data in " + dir.string());
    f1 << "corpus_id,passage_id,passage_len,overlap_len,improbable,ngram_log_prob\n";
    f2 << "corpus_id,passage_id,overlap_len,overlap_frequency,improbable,ngram_log_prob\n";
    for (const auto& r : records) {
        const std::string ids = csv_field(r.corpus_id) + ',' + csv_field(r.passage_id) + ',';
        const std::string tail = ',' + flag(r.improbable) + ',' + fixed2(r.ngram_log_prob) + '\n';
        f1 << ids << r.passage_len << ',' << r.overlap_len << tail;
        f2 << ids << r.overlap_len << ',' << r.overlap_frequency << tail;
    }
    if (!f1 || !f2) throw IoError("write failed in " + dir.string());
}

}  // namespace leakscan
