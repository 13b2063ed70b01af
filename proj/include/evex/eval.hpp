#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evex/chunking.hpp"
#include "evex/document.hpp"
#include "evex/extraction.hpp"
#include "evex/oracle.hpp"

namespace evex {

struct EvalExample {
    std::string id;
    std::string query;
    std::string article;
    std::vector<std::string> gold_answers;
    std::string dataset_tag;
};

struct SftTriplet {
    std::string query;
    std::string article;
    std::string evidence;  // verbatim, sentence-aligned substring of article
};

/// Answer producer behind the QA step. Implementations must be safe to call
/// from several worker threads when the runner is parallel.
class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string generate(const PromptEnvelope& prompt) = 0;
};

/// Hermetic generator: answers with the article slot of the prompt, i.e.
/// whatever evidence the pipeline supplied. Makes F1 measure evidence
/// quality directly.
class EchoGenerator : public Generator {
public:
    std::string generate(const PromptEnvelope& prompt) override;
};

enum class Pipeline {
    Cfic,            // constrained prefix decoding + boundary probing
    ChunkSw,         // sliding-window chunks + reranker
    ChunkPara,       // paragraph chunks + reranker
    FullArticle,     // whole article as evidence
    RandomSpan,      // seeded sentence-aligned control span
};

Pipeline parse_pipeline(const std::string& name);  // ConfigError on unknown name
std::string pipeline_name(Pipeline p);

struct ExampleRecord {
    std::string id;
    std::string dataset_tag;
    std::string evidence;    // context handed to the generator
    std::string prediction;
    double f1 = 0.0;
    ExtractionDiagnostics diagnostics;  // populated by the cfic pipeline
    bool failed = false;
    std::string error;
};

/// One eval run. Means cover successful examples only; a dataset whose
/// examples all failed (or an empty run) reports a null mean.
struct MetricReport {
    std::string pipeline;
    std::map<std::string, std::optional<double>> mean_f1_by_dataset;
    std::optional<double> overall_mean_f1;
    std::vector<ExampleRecord> records;  // ordered by (id, input position)
    int failures = 0;
    std::map<std::string, std::string> config_snapshot;
};

struct EvalConfig {
    DecodeConfig decode;
    int max_words = 256;       // sliding-window chunk budget
    int top_n = 0;             // passages fed to the generator; 0 = decode.k
    std::uint64_t seed = 0;    // random-span control
    int parallelism = 1;
};

/// Fresh (or shared) oracle per example; relevance mocks are built per
/// (query, article) pair, remote oracles just return themselves.
using OracleFactory = std::function<std::shared_ptr<Oracle>(const EvalExample&)>;

// JSONL ingestion. Accepted fields per line: query|input, article|context,
// answers (non-empty string array), optional id|_id and dataset. Malformed
// lines raise ParseError naming the line, or are skipped with a warning when
// lenient is set.
std::vector<EvalExample> load_examples(const std::string& path, bool lenient = false);

// Token-level F1 after answer normalization (lowercase, punctuation removed,
// articles a/an/the dropped, whitespace collapsed), maximized over golds.
double qa_f1(const std::string& prediction, const std::vector<std::string>& golds);

MetricReport run_eval(Pipeline pipeline, const std::vector<EvalExample>& examples,
                      const OracleFactory& oracle_factory, Generator& generator,
                      const EvalConfig& cfg, const ChunkScorer* scorer = nullptr);

std::string report_to_json(const MetricReport& report);  // stable key order
std::string report_table(const MetricReport& report);    // per-dataset text table

/// Query producer for SFT-triplet construction.
class QueryGenerator {
public:
    virtual ~QueryGenerator() = default;
    virtual std::string make_query(const std::string& evidence) = 0;
};

/// Deterministic mock: asks about the span's rarest content words.
class TemplateQueryGenerator : public QueryGenerator {
public:
    std::string make_query(const std::string& evidence) override;
};

struct SftConfig {
    int min_sentences = 1;
    int max_sentences = 6;
    int per_doc = 4;
    std::uint64_t seed = 0;
};

// Samples sentence-aligned spans and pairs each with a generated query.
// Query-generator failures skip the span with a warning on stderr.
std::vector<SftTriplet> sft_make(const std::vector<SourceDocument>& docs, const SftConfig& cfg,
                                 QueryGenerator& queries);

void write_sft_jsonl(const std::string& path, const std::vector<SftTriplet>& triplets);

}  // namespace evex
