#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evex/chunking.hpp"
#include "evex/config.hpp"
#include "evex/errors.hpp"
#include "evex/eval.hpp"
#include "evex/extraction.hpp"
#include "evex/mock_oracles.hpp"
#include "evex/remote.hpp"

namespace {

using namespace evex;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Io: return 3;
        case ErrorKind::Oracle: return 4;
        case ErrorKind::Parse: return 5;
        case ErrorKind::Data: return 5;
        case ErrorKind::Internal: return 1;
    }
    return 1;
}

// Flag values that were actually given; absent flags must not clobber the
// config file or environment.
struct FlagValues {
    std::string config_path;
    std::optional<std::string> oracle;
    std::optional<std::string> scripted_table;
    std::optional<int> k;
    std::optional<int> d;
    std::optional<int> max_beta;
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_candidates_expanded;
    std::optional<int> max_context_tokens;
    std::optional<std::string> pipeline;
    std::optional<std::string> out;
    std::optional<int> parallelism;
    std::optional<int> max_words;
    std::optional<int> top_n;
    bool lenient = false;
    bool lenient_given = false;
};

void add_common_flags(CLI::App* cmd, FlagValues& f) {
    cmd->add_option("--config", f.config_path, "key=value config file");
    cmd->add_option("--oracle", f.oracle, "mock:relevance | mock:scripted | http(s) URL");
    cmd->add_option("--scripted-table", f.scripted_table,
                    "context table JSON for mock:scripted");
    cmd->add_option("--k", f.k, "passages to return");
    cmd->add_option("--d", f.d, "boundary probe horizon in tokens");
    cmd->add_option("--max-beta", f.max_beta, "prefix length cap");
    cmd->add_option("--mode", f.mode, "deterministic | stochastic");
    cmd->add_option("--seed", f.seed, "seed for all randomness");
    cmd->add_option("--max-candidates-expanded", f.max_candidates_expanded,
                    "frontier expansion cap");
    cmd->add_option("--max-context-tokens", f.max_context_tokens,
                    "prompt token budget (0 = unlimited)");
    cmd->add_option("--pipeline", f.pipeline,
                    "cfic | chunk-sw | chunk-para | full-article | random-span");
    cmd->add_option("--out", f.out, "output path (default stdout)");
    cmd->add_option("--parallelism", f.parallelism, "eval worker threads");
    cmd->add_option("--max-words", f.max_words, "sliding-window word budget");
    cmd->add_option("--top-n", f.top_n, "passages fed to the generator (0 = k)");
    cmd->add_flag("--lenient", f.lenient, "skip malformed dataset lines with a warning")
        ->each([&f](const std::string&) { f.lenient_given = true; });
}

RunConfig resolve_config(const FlagValues& f) {
    RunConfig cfg;
    if (!f.config_path.empty()) apply_config_file(cfg, f.config_path);
    apply_env_overrides(cfg);
    if (f.oracle) cfg.oracle = *f.oracle;
    if (f.scripted_table) cfg.scripted_table = *f.scripted_table;
    if (f.k) cfg.decode.k = *f.k;
    if (f.d) cfg.decode.d = *f.d;
    if (f.max_beta) cfg.decode.max_beta = *f.max_beta;
    if (f.mode) {
        if (*f.mode == "deterministic") {
            cfg.decode.mode = DecodeMode::Deterministic;
        } else if (*f.mode == "stochastic") {
            cfg.decode.mode = DecodeMode::Stochastic;
        } else {
            throw ConfigError("mode must be deterministic or stochastic, got '" + *f.mode + "'");
        }
    }
    if (f.seed) cfg.decode.seed = *f.seed;
    if (f.max_candidates_expanded) cfg.decode.max_candidates_expanded = *f.max_candidates_expanded;
    if (f.max_context_tokens) cfg.decode.max_context_tokens = *f.max_context_tokens;
    if (f.pipeline) cfg.pipeline = *f.pipeline;
    if (f.out) cfg.out = *f.out;
    if (f.parallelism) cfg.parallelism = *f.parallelism;
    if (f.max_words) cfg.max_words = *f.max_words;
    if (f.top_n) cfg.top_n = *f.top_n;
    if (f.lenient_given) cfg.lenient = f.lenient;
    cfg.validate();
    return cfg;
}

struct OracleSetup {
    OracleFactory factory;
    std::shared_ptr<RemoteEndpoint> endpoint;  // set for URL oracles only
};

OracleSetup make_oracle_setup(const RunConfig& cfg) {
    OracleSetup setup;
    if (cfg.oracle == "mock:relevance") {
        setup.factory = [](const EvalExample& ex) -> std::shared_ptr<Oracle> {
            SourceDocument doc(ex.id, ex.article);
            return std::make_shared<RelevanceOracle>(ex.query, doc);
        };
        return setup;
    }
    if (cfg.oracle == "mock:scripted") {
        if (cfg.scripted_table.empty()) {
            throw ConfigError("mock:scripted requires --scripted-table");
        }
        std::shared_ptr<ScriptedOracle> oracle =
            ScriptedOracle::shared_from_json_file(cfg.scripted_table);
        setup.factory = [oracle](const EvalExample&) -> std::shared_ptr<Oracle> {
            return oracle;
        };
        return setup;
    }
    RemoteConfig rc;
    rc.base_url = cfg.oracle;
    rc.bearer_token = cfg.bearer_token;
    setup.endpoint = std::make_shared<RemoteEndpoint>(rc);
    std::shared_ptr<RemoteOracle> oracle = std::make_shared<RemoteOracle>(setup.endpoint);
    setup.factory = [oracle](const EvalExample&) -> std::shared_ptr<Oracle> { return oracle; };
    return setup;
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::cout << content;
        if (content.empty() || content.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write output: " + out_path);
    out << content;
    if (content.empty() || content.back() != '\n') out << '\n';
}

std::map<std::string, std::string> config_snapshot(const RunConfig& cfg) {
    return {
        {"oracle", cfg.oracle},
        {"k", std::to_string(cfg.decode.k)},
        {"d", std::to_string(cfg.decode.d)},
        {"max_beta", std::to_string(cfg.decode.max_beta)},
        {"mode",
         cfg.decode.mode == DecodeMode::Deterministic ? "deterministic" : "stochastic"},
        {"seed", std::to_string(cfg.decode.seed)},
        {"max_candidates_expanded", std::to_string(cfg.decode.max_candidates_expanded)},
        {"max_context_tokens", std::to_string(cfg.decode.max_context_tokens)},
    };
}

nlohmann::json extraction_to_json(const std::string& query, const ExtractionResult& res,
                                  const RunConfig& cfg) {
    nlohmann::json spans = nlohmann::json::array();
    for (const EvidenceSpan& s : res.spans) {
        spans.push_back({{"char_start", s.char_start},
                         {"char_end", s.char_end},
                         {"start_sentence", s.start_sentence},
                         {"end_sentence", s.end_sentence},
                         {"text", s.text},
                         {"prefix_score", s.prefix_score},
                         {"eos_logprob", s.eos_logprob},
                         {"truncated", s.truncated}});
    }
    return {{"doc_id", res.doc_id},
            {"query", query},
            {"spans", spans},
            {"diagnostics",
             {{"oracle_calls", res.diagnostics.oracle_calls},
              {"candidates_expanded", res.diagnostics.candidates_expanded},
              {"beta_per_candidate", res.diagnostics.beta_per_candidate},
              {"sentences_considered", res.diagnostics.sentences_considered}}},
            {"config", config_snapshot(cfg)}};
}

int cmd_extract(const FlagValues& flags, const std::string& query, const std::string& doc_path) {
    RunConfig cfg = resolve_config(flags);
    OracleSetup setup = make_oracle_setup(cfg);
    std::vector<SourceDocument> docs = load_documents(doc_path);

    nlohmann::json results = nlohmann::json::array();
    for (const SourceDocument& doc : docs) {
        EvalExample ex;
        ex.id = doc.doc_id();
        ex.query = query;
        ex.article = doc.text();
        std::shared_ptr<Oracle> oracle = setup.factory(ex);
        ExtractionResult res = extract_evidence(query, doc, *oracle, cfg.decode);
        results.push_back(extraction_to_json(query, res, cfg));
    }
    emit(cfg.out, results.size() == 1 ? results[0].dump(2) : results.dump(2));
    return 0;
}

int cmd_chunk(const FlagValues& flags, const std::string& doc_path, const std::string& chunker,
              const std::string& query, const std::string& scorer_name) {
    RunConfig cfg = resolve_config(flags);
    if (chunker != "sw" && chunker != "para") {
        throw ConfigError("chunker must be sw or para, got '" + chunker + "'");
    }
    std::vector<SourceDocument> docs = load_documents(doc_path);

    std::unique_ptr<ChunkScorer> scorer;
    if (scorer_name == "lexical") {
        scorer = std::make_unique<LexicalScorer>();
    } else if (scorer_name == "embed") {
        OracleSetup setup = make_oracle_setup(cfg);
        if (!setup.endpoint) {
            throw ConfigError("the embed scorer needs a URL oracle for /v1/embed");
        }
        scorer = std::make_unique<RemoteEmbeddingScorer>(setup.endpoint);
    } else {
        throw ConfigError("scorer must be lexical or embed, got '" + scorer_name + "'");
    }

    nlohmann::json results = nlohmann::json::array();
    for (const SourceDocument& doc : docs) {
        SentenceMap map = segment_sentences(doc);
        std::vector<Chunk> chunks = chunker == "sw"
                                        ? chunk_sliding_window(map, doc, cfg.max_words)
                                        : chunk_paragraphs(segment_paragraphs(doc), doc, &map);
        nlohmann::json listing = nlohmann::json::array();
        if (query.empty()) {
            for (const Chunk& c : chunks) {
                listing.push_back({{"text", c.text},
                                   {"char_start", c.char_start},
                                   {"char_end", c.char_end},
                                   {"sentence_start", c.sentence_start},
                                   {"sentence_end", c.sentence_end},
                                   {"word_count", c.word_count},
                                   {"over_limit", c.over_limit}});
            }
        } else {
            for (const RerankedChunk& rc : rerank(query, chunks, *scorer)) {
                listing.push_back({{"text", rc.chunk.text},
                                   {"char_start", rc.chunk.char_start},
                                   {"char_end", rc.chunk.char_end},
                                   {"sentence_start", rc.chunk.sentence_start},
                                   {"sentence_end", rc.chunk.sentence_end},
                                   {"word_count", rc.chunk.word_count},
                                   {"over_limit", rc.chunk.over_limit},
                                   {"score", rc.score}});
            }
        }
        results.push_back({{"doc_id", doc.doc_id()},
                           {"chunker", chunker},
                           {"chunks", listing}});
    }
    emit(cfg.out, results.size() == 1 ? results[0].dump(2) : results.dump(2));
    return 0;
}

MetricReport eval_once(const RunConfig& cfg, const std::vector<EvalExample>& examples,
                       const std::string& generator_name, const std::string& scorer_name) {
    OracleSetup setup = make_oracle_setup(cfg);

    std::unique_ptr<ChunkScorer> scorer;
    if (scorer_name == "embed") {
        if (!setup.endpoint) {
            throw ConfigError("the embed scorer needs a URL oracle for /v1/embed");
        }
        scorer = std::make_unique<RemoteEmbeddingScorer>(setup.endpoint);
    } else if (scorer_name != "lexical") {
        throw ConfigError("scorer must be lexical or embed, got '" + scorer_name + "'");
    }

    std::unique_ptr<Generator> generator;
    if (generator_name == "echo") {
        generator = std::make_unique<EchoGenerator>();
    } else if (generator_name == "remote") {
        if (!setup.endpoint) {
            throw ConfigError("the remote generator needs a URL oracle for /v1/generate");
        }
        generator = std::make_unique<RemoteGenerator>(setup.endpoint);
    } else {
        throw ConfigError("generator must be echo or remote, got '" + generator_name + "'");
    }

    EvalConfig ecfg;
    ecfg.decode = cfg.decode;
    ecfg.max_words = cfg.max_words;
    ecfg.top_n = cfg.top_n;
    ecfg.seed = cfg.decode.seed;
    ecfg.parallelism = cfg.parallelism;
    return run_eval(parse_pipeline(cfg.pipeline), examples, setup.factory, *generator, ecfg,
                    scorer.get());
}

int cmd_eval(const FlagValues& flags, const std::string& dataset_path,
             const std::string& generator_name, const std::string& scorer_name) {
    RunConfig cfg = resolve_config(flags);
    std::vector<EvalExample> examples = load_examples(dataset_path, cfg.lenient);
    MetricReport report = eval_once(cfg, examples, generator_name, scorer_name);
    emit(cfg.out, report_to_json(report));
    std::cerr << report_table(report);
    return 0;
}

int cmd_sft_make(const FlagValues& flags, const std::string& corpus_path) {
    RunConfig cfg = resolve_config(flags);
    std::vector<SourceDocument> docs = load_documents(corpus_path);

    SftConfig scfg;
    scfg.min_sentences = cfg.sft_min_sentences;
    scfg.max_sentences = cfg.sft_max_sentences;
    scfg.per_doc = cfg.sft_per_doc;
    scfg.seed = cfg.decode.seed;

    std::unique_ptr<QueryGenerator> queries;
    if (cfg.oracle.rfind("http", 0) == 0) {
        OracleSetup setup = make_oracle_setup(cfg);
        queries = std::make_unique<RemoteQueryGenerator>(setup.endpoint);
    } else {
        queries = std::make_unique<TemplateQueryGenerator>();
    }

    std::vector<SftTriplet> triplets = sft_make(docs, scfg, *queries);
    if (cfg.out.empty()) {
        for (const SftTriplet& t : triplets) {
            std::cout << nlohmann::json{{"query", t.query},
                                        {"article", t.article},
                                        {"evidence", t.evidence}}
                             .dump()
                      << "\n";
        }
    } else {
        write_sft_jsonl(cfg.out, triplets);
    }
    return 0;
}

int cmd_sweep_d(const FlagValues& flags, const std::string& dataset_path,
                const std::vector<int>& d_values, const std::string& generator_name,
                const std::string& scorer_name) {
    RunConfig cfg = resolve_config(flags);
    if (d_values.size() < 2) throw ConfigError("sweep-d needs at least two --d-values");
    std::vector<EvalExample> examples = load_examples(dataset_path, cfg.lenient);

    std::ostringstream csv;
    csv << "d,dataset,mean_f1\n";
    csv.precision(17);
    int failed_runs = 0;
    for (int d : d_values) {
        RunConfig run = cfg;
        run.decode.d = d;
        try {
            run.decode.validate();
            MetricReport report = eval_once(run, examples, generator_name, scorer_name);
            for (const auto& [dataset, mean] : report.mean_f1_by_dataset) {
                if (mean.has_value()) {
                    csv << d << "," << dataset << "," << *mean << "\n";
                }
            }
        } catch (const std::exception& err) {
            ++failed_runs;
            std::cerr << "warning: sweep run d=" << d << " failed: " << err.what() << "\n";
        }
    }
    emit(cfg.out, csv.str());
    if (failed_runs > 0) {
        std::cerr << failed_runs << " of " << d_values.size() << " sweep runs failed\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Verbatim evidence extraction over long documents"};
    app.require_subcommand(1);

    FlagValues flags;
    std::string query;
    std::string doc_path;
    std::string dataset_path;
    std::string corpus_path;
    std::string chunker = "sw";
    std::string generator_name = "echo";
    std::string scorer_name = "lexical";
    std::vector<int> d_values;

    CLI::App* extract = app.add_subcommand("extract", "Extract evidence spans for a query");
    extract->add_option("--query", query, "question to extract evidence for")->required();
    extract->add_option("--doc", doc_path, "document file (.txt or .jsonl)")->required();
    add_common_flags(extract, flags);

    CLI::App* chunk = app.add_subcommand("chunk", "Chunk a document, optionally reranked");
    chunk->add_option("--doc", doc_path, "document file (.txt or .jsonl)")->required();
    chunk->add_option("--chunker", chunker, "sw | para");
    chunk->add_option("--query", query, "rerank against this query");
    chunk->add_option("--scorer", scorer_name, "lexical | embed");
    add_common_flags(chunk, flags);

    CLI::App* eval_cmd = app.add_subcommand("eval", "Run a QA evaluation over a dataset");
    eval_cmd->add_option("--dataset", dataset_path, "JSONL eval dataset")->required();
    eval_cmd->add_option("--generator", generator_name, "echo | remote");
    eval_cmd->add_option("--scorer", scorer_name, "lexical | embed");
    add_common_flags(eval_cmd, flags);

    CLI::App* sft = app.add_subcommand("sft-make", "Sample (query, article, evidence) triplets");
    sft->add_option("--corpus", corpus_path, "document file (.txt or .jsonl)")->required();
    add_common_flags(sft, flags);

    CLI::App* sweep = app.add_subcommand("sweep-d", "Evaluate across several probe horizons");
    sweep->add_option("--dataset", dataset_path, "JSONL eval dataset")->required();
    sweep->add_option("--d-values", d_values, "comma-separated d values")
        ->required()
        ->delimiter(',');
    sweep->add_option("--generator", generator_name, "echo | remote");
    sweep->add_option("--scorer", scorer_name, "lexical | embed");
    add_common_flags(sweep, flags);

    try {
        app.parse(argc, argv);
        if (extract->parsed()) return cmd_extract(flags, query, doc_path);
        if (chunk->parsed()) return cmd_chunk(flags, doc_path, chunker, query, scorer_name);
        if (eval_cmd->parsed()) return cmd_eval(flags, dataset_path, generator_name, scorer_name);
        if (sft->parsed()) return cmd_sft_make(flags, corpus_path);
        if (sweep->parsed()) {
            return cmd_sweep_d(flags, dataset_path, d_values, generator_name, scorer_name);
        }
        return 2;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
