// Command-line front end: build, query, analyze, filter, threshold.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "leakscan/cdawg.hpp"
#include "leakscan/curate.hpp"
#include "leakscan/error.hpp"
#include "leakscan/ingest.hpp"
#include "leakscan/ngram.hpp"
#include "leakscan/query.hpp"
#include "leakscan/report.hpp"

namespace fs = std::filesystem;
using namespace leakscan;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFormat = 3;
constexpr int kExitIo = 4;

constexpr std::string_view kBoundaryText = "<|endoftext|>";

std::optional<Vocabulary> load_vocab(const std::string& explicit_path, const fs::path& beside) {
    if (!explicit_path.empty()) return Vocabulary::load_json(explicit_path);
    fs::path implicit = beside;
    implicit += ".vocab.json";
    if (fs::exists(implicit)) return Vocabulary::load_json(implicit);
    return std::nullopt;
}

// Raw text becomes documents at every boundary marker.
void add_text_documents(std::string_view raw, Vocabulary& vocab, std::vector<TokenSequence>& docs,
                        std::uint64_t& words) {
    const std::string text = normalize_text(raw);
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(kBoundaryText, pos);
        if (end == std::string::npos) end = text.size();
        const std::string_view part(text.data() + pos, end - pos);
        words += count_whitespace_words(part);
        auto seq = tokenize_whitespace(part, vocab, VocabMode::open, docs.size());
        if (!seq.tokens.empty()) docs.push_back(std::move(seq));
        pos = end + kBoundaryText.size();
    }
}

struct BuildArgs {
    std::vector<std::string> inputs;
    std::string format = "tokens";
    std::optional<TokenId> boundary;
    bool counts = true;
    bool mmap = false;
    std::string output;
    std::string vocab_out;
    std::uint64_t words = 0;
};

int run_build(const BuildArgs& a) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<TokenSequence> docs;
    BuildOptions opts;
    opts.with_counts = a.counts;
    opts.disk_backed = a.mmap;
    std::uint64_t words = 0;
    std::optional<Vocabulary> vocab;

    if (a.format == "tokens") {
        for (const auto& in : a.inputs) {
            TokenFileReader reader(in);
            const auto& h = reader.header();
            if (a.boundary && *a.boundary != h.boundary)
                throw ConfigError(in + " declares boundary id " + std::to_string(h.boundary) + ", not " +
                                  std::to_string(*a.boundary));
            if (opts.vocab_size && opts.vocab_size != h.vocab_size)
                throw ConfigError(in + " declares vocabulary size " + std::to_string(h.vocab_size) + ", earlier inputs " +
                                  std::to_string(opts.vocab_size));
            opts.vocab_size = h.vocab_size;
            while (auto doc = reader.next()) {
                doc->doc_id = docs.size();
                docs.push_back(std::move(*doc));
            }
        }
    } else {
        if (a.boundary) throw ConfigError("--boundary-id applies to token files; text splits at " + std::string(kBoundaryText));
        vocab.emplace();
        for (const auto& in : a.inputs) {
            if (a.format == "raw") {
                add_text_documents(read_file(in), *vocab, docs, words);
            } else {
                for (const auto& t : read_jsonl_texts(in)) add_text_documents(t, *vocab, docs, words);
            }
        }
        opts.vocab_size = std::max<std::uint32_t>(vocab->size_bound(), 1);
    }
    opts.whitespace_words = a.words ? a.words : words;

    const auto index = CdawgIndex::build(docs, opts);
    index.save(a.output);
    if (vocab) {
        fs::path vpath = a.vocab_out;
        if (vpath.empty()) {
            vpath = a.output;
            vpath += ".vocab.json";
        }
        vocab->save_json(vpath);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::ordered_json j;
    j["documents"] = index.num_docs();
    j["tokens"] = index.source_len();
    j["whitespace_words"] = index.whitespace_words();
    j["states"] = index.num_states();
    j["edges"] = index.num_edges();
    j["counts"] = index.has_counts();
    j["seconds"] = std::round(secs * 1000) / 1000;
    std::cout << j.dump() << '\n';
    return 0;
}

struct QueryArgs {
    std::string index;
    std::string passage;
    std::string vocab;
    bool per_position = false;
};

int run_query(const QueryArgs& a) {
    const auto index = CdawgIndex::load(a.index);
    const auto vocab = load_vocab(a.vocab, a.index);
    const auto ps = load_passages(a.passage, vocab ? &*vocab : nullptr);
    for (const auto& p : ps.passages) {
        const auto r = longest_overlap(index, p.tokens, p.id);
        nlohmann::ordered_json j;
        j["passage_id"] = r.passage_id;
        j["passage_len"] = r.passage_len;
        j["max_len"] = r.max_len;
        if (r.frequencies_known) j["max_frequency"] = r.max_frequency;
        j["max_end_positions"] = r.max_end_positions;
        auto& overlaps = j["overlaps"] = nlohmann::ordered_json::array();
        for (const auto& o : r.overlaps) {
            nlohmann::ordered_json oj;
            oj["tokens"] = o.tokens;
            if (vocab) {
                std::string text;
                for (TokenId t : o.tokens) text += (text.empty() ? "" : " ") + std::string(vocab->word(t));
                oj["text"] = text;
            }
            if (r.frequencies_known) oj["frequency"] = o.frequency;
            oj["end_positions"] = o.end_positions;
            overlaps.push_back(std::move(oj));
        }
        if (a.per_position) j["lengths"] = r.lengths;
        std::cout << j.dump() << '\n';
    }
    return 0;
}

struct AnalyzeArgs {
    std::string index;
    std::string chunk_dir;
    std::string passages;
    std::string arpa;
    std::string vocab;
    std::string corpus_id;
    std::optional<double> corpus_words;
    double alpha = 0.05;
    std::string output;
    std::string figure_data;
    unsigned threads = 0;
};

int run_analyze(const AnalyzeArgs& a) {
    std::vector<fs::path> chunk_paths;
    fs::path anchor;
    if (!a.index.empty()) {
        anchor = a.index;
    } else {
        if (!fs::is_directory(a.chunk_dir)) throw IoError("chunk directory " + a.chunk_dir + " does not exist");
        for (const auto& e : fs::directory_iterator(a.chunk_dir))
            if (e.is_regular_file() && e.path().extension() == ".cdwg") chunk_paths.push_back(e.path());
        std::sort(chunk_paths.begin(), chunk_paths.end());
        if (chunk_paths.empty()) throw ConfigError("no .cdwg indexes in " + a.chunk_dir);
        anchor = fs::path(a.chunk_dir) / "corpus";
    }
    const auto vocab = load_vocab(a.vocab, anchor);
    const auto passages = load_passages(a.passages, vocab ? &*vocab : nullptr);

    AnalyzeOptions opts;
    opts.detokenizer = vocab ? &*vocab : nullptr;
    opts.workers = a.threads;
    opts.corpus_id = a.corpus_id;
    if (opts.corpus_id.empty())
        opts.corpus_id = a.index.empty() ? fs::path(a.chunk_dir).lexically_normal().filename().string()
                                         : fs::path(a.index).stem().string();
    if (opts.corpus_id.empty()) opts.corpus_id = fs::path(a.chunk_dir).lexically_normal().parent_path().filename().string();

    std::optional<NgramModel> model;
    std::vector<OverlapRecord> records;
    auto chance_for = [&](std::uint64_t index_words) {
        if (a.arpa.empty()) return;
        model = NgramModel::load_arpa(a.arpa);
        const double n = a.corpus_words ? *a.corpus_words : double(index_words);
        if (n < 1) throw ConfigError("--corpus-words is required: the index records no whitespace-word count");
        opts.chance = ChanceConfig{&*model, n, a.alpha};
    };
    if (!a.index.empty()) {
        const auto index = CdawgIndex::load(a.index);
        chance_for(index.whitespace_words());
        records = analyze(index, passages, opts);
    } else {
        std::uint64_t words = 0;
        if (!a.arpa.empty() && !a.corpus_words)
            for (const auto& p : chunk_paths) words += CdawgIndex::load(p, LoadMode::mapped).whitespace_words();
        chance_for(words);
        records = analyze_index_files(chunk_paths, passages, opts);
    }
    emit_jsonl(records, a.output);
    if (!a.figure_data.empty()) emit_figure_data(records, a.figure_data);

    std::size_t improbable = 0;
    for (const auto& r : records) improbable += r.improbable.value_or(false);
    nlohmann::ordered_json j;
    j["passages"] = records.size();
    j["improbable"] = improbable;
    j["output"] = a.output;
    std::cout << j.dump() << '\n';
    return 0;
}

struct FilterArgs {
    std::string manifest;
    std::string passages;
    std::string vocab;
    std::uint32_t max_overlap = 11;
    std::size_t sample = 0;
    std::uint64_t seed = 0;
    std::string output;
    unsigned threads = 0;
};

int run_filter(const FilterArgs& a) {
    auto manifests = read_manifest(a.manifest);
    if (manifests.empty()) throw ConfigError("manifest " + a.manifest + " lists no chunks");
    std::optional<Vocabulary> vocab;
    if (!a.vocab.empty()) vocab = Vocabulary::load_json(a.vocab);
    const auto passages = load_passages(a.passages, vocab ? &*vocab : nullptr);
    std::vector<TokenSequence> seqs;
    for (const auto& p : passages.passages) seqs.push_back(TokenSequence{seqs.size(), p.tokens});

    const bool need_scan = std::any_of(manifests.begin(), manifests.end(), [](const auto& m) { return !m.max_overlap; });
    if (need_scan) scan_chunks(manifests, seqs, token_file_loader(fs::path(a.manifest).parent_path()), a.threads);
    auto filtered = filter_chunks(manifests, a.max_overlap);
    std::vector<std::string> sampled;
    if (a.sample > 0) sampled = sample_chunks(filtered, a.sample, a.seed);
    for (auto& m : filtered) m.sampled = std::binary_search(sampled.begin(), sampled.end(), m.chunk_id);
    write_manifest(a.output, filtered);

    std::size_t eligible = 0;
    for (const auto& m : filtered) eligible += m.eligible;
    nlohmann::ordered_json j;
    j["chunks"] = filtered.size();
    j["eligible"] = eligible;
    j["sampled"] = sampled;
    std::cout << j.dump() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"leakscan: overlap auditing between probe passages and tokenized corpora"};
    app.require_subcommand(1);

    BuildArgs build;
    auto* b = app.add_subcommand("build", "Index a corpus");
    b->add_option("--input", build.inputs, "Corpus files")->required();
    b->add_option("--format", build.format, "Input format")->check(CLI::IsMember({"raw", "tokens", "jsonl"}));
    b->add_option("--boundary-id", build.boundary, "Document boundary id (must match token file headers)");
    b->add_flag("--counts,!--no-counts", build.counts, "Annotate occurrence counts (default on)");
    b->add_flag("--mmap", build.mmap, "Mark the index for memory-mapped loading");
    b->add_option("--output", build.output, "Index file")->required();
    b->add_option("--vocab", build.vocab_out, "Vocabulary output for text input (default <output>.vocab.json)");
    b->add_option("--words", build.words, "Whitespace-word count to record (default: counted from text)");

    QueryArgs query;
    auto* q = app.add_subcommand("query", "Longest overlaps of passages with an index");
    q->add_option("--index", query.index)->required();
    q->add_option("--passage", query.passage, "Passage file or directory")->required();
    q->add_option("--vocab", query.vocab, "Vocabulary (default <index>.vocab.json when present)");
    q->add_flag("--per-position", query.per_position, "Include per-position matching lengths");

    AnalyzeArgs an;
    auto* a = app.add_subcommand("analyze", "Audit passages and write overlap records");
    auto* a_index = a->add_option("--index", an.index);
    auto* a_chunks = a->add_option("--chunk-dir", an.chunk_dir, "Directory of per-chunk .cdwg indexes");
    a_index->excludes(a_chunks);
    a->add_option("--passages", an.passages)->required();
    a->add_option("--arpa", an.arpa, "Backoff n-gram model for chance assessment");
    a->add_option("--corpus-words", an.corpus_words, "Whitespace words in the corpus (default: from the index)");
    a->add_option("--alpha", an.alpha)->check(CLI::Range(0.0, 1.0));
    a->add_option("--vocab", an.vocab, "Vocabulary (default <index>.vocab.json when present)");
    a->add_option("--corpus-id", an.corpus_id, "Corpus label (default: index stem or chunk directory name)");
    a->add_option("--output", an.output)->required();
    a->add_option("--figure-data", an.figure_data, "Directory for figure1.csv and figure2.csv");
    a->add_option("--threads", an.threads);

    FilterArgs fa;
    auto* f = app.add_subcommand("filter", "Scan chunks and keep those with bounded overlap");
    f->add_option("--chunk-manifest", fa.manifest)->required();
    f->add_option("--passages", fa.passages)->required();
    f->add_option("--vocab", fa.vocab, "Vocabulary for text passages");
    f->add_option("--max-overlap", fa.max_overlap, "Largest allowed overlap (inclusive)");
    f->add_option("--sample", fa.sample, "Number of eligible chunks to sample");
    f->add_option("--seed", fa.seed);
    f->add_option("--output", fa.output)->required();
    f->add_option("--threads", fa.threads);

    double t_alpha = 0.05, t_words = 0;
    auto* t = app.add_subcommand("threshold", "Log-probability below which an overlap is improbable");
    t->add_option("--alpha", t_alpha);
    t->add_option("--words", t_words, "Whitespace words in the corpus")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*b) return run_build(build);
        if (*q) return run_query(query);
        if (*a) {
            if (an.index.empty() == an.chunk_dir.empty()) throw ConfigError("give exactly one of --index or --chunk-dir");
            return run_analyze(an);
        }
        if (*f) return run_filter(fa);
        if (*t) {
            std::printf("%.6f\n", chance_threshold(t_words, t_alpha));
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kExitFormat;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
