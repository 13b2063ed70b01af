#include "evex/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "evex/errors.hpp"
#include "evex/text.hpp"

namespace evex {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// SQuAD-style answer normalization: ASCII lowercase, punctuation removed,
// articles dropped, then whitespace tokens.
std::vector<std::string> answer_tokens(std::string_view s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (unsigned char ch : s) {
        if (ch < 128 && std::ispunct(ch)) continue;
        cleaned.push_back(static_cast<char>(ch < 128 ? std::tolower(ch) : ch));
    }
    std::vector<std::string> tokens;
    for (std::string_view w : text::split_words(cleaned)) {
        if (w == "a" || w == "an" || w == "the") continue;
        tokens.emplace_back(w);
    }
    return tokens;
}

double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) {
        return pred.empty() && gold.empty() ? 1.0 : 0.0;
    }
    std::map<std::string, int> budget;
    for (const std::string& t : gold) ++budget[t];
    int same = 0;
    for (const std::string& t : pred) {
        auto it = budget.find(t);
        if (it != budget.end() && it->second > 0) {
            --it->second;
            ++same;
        }
    }
    if (same == 0) return 0.0;
    double precision = static_cast<double>(same) / static_cast<double>(pred.size());
    double recall = static_cast<double>(same) / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::string join_lines(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += parts[i];
    }
    return out;
}

std::vector<std::size_t> sentence_word_counts(const SourceDocument& doc, const SentenceMap& map) {
    std::vector<std::size_t> words(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        words[i] = text::count_words(map.sentence_text(doc, static_cast<int>(i)));
    }
    return words;
}

ExampleRecord run_one(Pipeline pipeline, const EvalExample& ex, const OracleFactory& factory,
                      Generator& generator, const EvalConfig& cfg, const ChunkScorer& scorer) {
    ExampleRecord rec;
    rec.id = ex.id;
    rec.dataset_tag = ex.dataset_tag;
    try {
        SourceDocument doc(ex.id, ex.article);
        const int top_n = cfg.top_n > 0 ? cfg.top_n : cfg.decode.k;
        std::vector<std::string> parts;

        switch (pipeline) {
            case Pipeline::Cfic: {
                std::shared_ptr<Oracle> oracle = factory(ex);
                if (!oracle) throw ConfigError("oracle factory returned no oracle");
                ExtractionResult res = extract_evidence(ex.query, doc, *oracle, cfg.decode);
                rec.diagnostics = res.diagnostics;
                for (std::size_t i = 0;
                     i < res.spans.size() && i < static_cast<std::size_t>(top_n); ++i) {
                    parts.push_back(res.spans[i].text);
                }
                break;
            }
            case Pipeline::ChunkSw:
            case Pipeline::ChunkPara: {
                SentenceMap map = segment_sentences(doc);
                std::vector<Chunk> chunks =
                    pipeline == Pipeline::ChunkSw
                        ? chunk_sliding_window(map, doc, cfg.max_words)
                        : chunk_paragraphs(segment_paragraphs(doc), doc, &map);
                std::vector<RerankedChunk> ranked = rerank(ex.query, chunks, scorer);
                for (std::size_t i = 0;
                     i < ranked.size() && i < static_cast<std::size_t>(top_n); ++i) {
                    parts.push_back(ranked[i].chunk.text);
                }
                break;
            }
            case Pipeline::FullArticle:
                parts.push_back(ex.article);
                break;
            case Pipeline::RandomSpan: {
                SentenceMap map = segment_sentences(doc);
                std::vector<std::size_t> words = sentence_word_counts(doc, map);
                std::mt19937_64 rng(cfg.seed ^ fnv1a(ex.id));
                int start = static_cast<int>(rng() % map.size());
                int end = start;
                std::size_t total = words[static_cast<std::size_t>(start)];
                while (static_cast<std::size_t>(end + 1) < map.size() &&
                       total + words[static_cast<std::size_t>(end + 1)] <=
                           static_cast<std::size_t>(cfg.decode.d)) {
                    ++end;
                    total += words[static_cast<std::size_t>(end)];
                }
                parts.emplace_back(doc.slice(map.at(start).char_start, map.at(end).char_end));
                break;
            }
        }

        rec.evidence = join_lines(parts);
        PromptEnvelope qa = build_prompt(ex.query, rec.evidence);
        rec.prediction = generator.generate(qa);
        rec.f1 = qa_f1(rec.prediction, ex.gold_answers);
    } catch (const std::exception& err) {
        rec.failed = true;
        rec.error = err.what();
    }
    return rec;
}

nlohmann::json diagnostics_json(const ExtractionDiagnostics& d) {
    return {{"oracle_calls", d.oracle_calls},
            {"candidates_expanded", d.candidates_expanded},
            {"beta_per_candidate", d.beta_per_candidate},
            {"sentences_considered", d.sentences_considered}};
}

}  // namespace

std::string EchoGenerator::generate(const PromptEnvelope& prompt) {
    std::vector<std::size_t> idx = text::char_to_byte_index(prompt.rendered);
    std::size_t from = idx[prompt.article_slot.start];
    std::size_t to = idx[prompt.article_slot.end];
    return prompt.rendered.substr(from, to - from);
}

Pipeline parse_pipeline(const std::string& name) {
    if (name == "cfic") return Pipeline::Cfic;
    if (name == "chunk-sw") return Pipeline::ChunkSw;
    if (name == "chunk-para") return Pipeline::ChunkPara;
    if (name == "full-article") return Pipeline::FullArticle;
    if (name == "random-span") return Pipeline::RandomSpan;
    throw ConfigError("unknown pipeline: " + name +
                      " (expected cfic, chunk-sw, chunk-para, full-article or random-span)");
}

std::string pipeline_name(Pipeline p) {
    switch (p) {
        case Pipeline::Cfic: return "cfic";
        case Pipeline::ChunkSw: return "chunk-sw";
        case Pipeline::ChunkPara: return "chunk-para";
        case Pipeline::FullArticle: return "full-article";
        case Pipeline::RandomSpan: return "random-span";
    }
    throw ConfigError("unknown pipeline value");
}

std::vector<EvalExample> load_examples(const std::string& path, bool lenient) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);

    std::vector<EvalExample> examples;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fail = [&](const std::string& why) -> bool {
            std::string msg = path + ":" + std::to_string(line_no) + ": " + why;
            if (lenient) {
                std::cerr << "warning: skipping " << msg << "\n";
                return false;
            }
            throw ParseError(msg);
        };
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            if (!fail("not a JSON object")) continue;
        }
        auto field = [&](const char* primary, const char* alias) -> const nlohmann::json* {
            if (rec.contains(primary)) return &rec[primary];
            if (alias != nullptr && rec.contains(alias)) return &rec[alias];
            return nullptr;
        };
        const nlohmann::json* query = field("query", "input");
        const nlohmann::json* article = field("article", "context");
        const nlohmann::json* answers = field("answers", nullptr);
        if (query == nullptr || !query->is_string()) {
            if (!fail("missing string field query/input")) continue;
        }
        if (article == nullptr || !article->is_string() ||
            article->get<std::string>().empty()) {
            if (!fail("missing non-empty string field article/context")) continue;
        }
        if (answers == nullptr || !answers->is_array() || answers->empty()) {
            if (!fail("missing non-empty array field answers")) continue;
        }
        EvalExample ex;
        ex.query = query->get<std::string>();
        ex.article = article->get<std::string>();
        bool bad_answer = false;
        for (const auto& a : *answers) {
            if (!a.is_string()) {
                bad_answer = true;
                break;
            }
            ex.gold_answers.push_back(a.get<std::string>());
        }
        if (bad_answer) {
            if (!fail("answers must be strings")) continue;
        }
        const nlohmann::json* id = field("id", "_id");
        ex.id = id != nullptr && id->is_string() ? id->get<std::string>()
                                                 : std::to_string(line_no);
        const nlohmann::json* dataset = field("dataset", nullptr);
        ex.dataset_tag = dataset != nullptr && dataset->is_string()
                             ? dataset->get<std::string>()
                             : "default";
        examples.push_back(std::move(ex));
    }
    return examples;
}

double qa_f1(const std::string& prediction, const std::vector<std::string>& golds) {
    if (golds.empty()) return 0.0;
    std::vector<std::string> pred = answer_tokens(prediction);
    double best = 0.0;
    for (const std::string& gold : golds) {
        best = std::max(best, token_f1(pred, answer_tokens(gold)));
    }
    return best;
}

MetricReport run_eval(Pipeline pipeline, const std::vector<EvalExample>& examples,
                      const OracleFactory& oracle_factory, Generator& generator,
                      const EvalConfig& cfg, const ChunkScorer* scorer) {
    cfg.decode.validate();
    if (cfg.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    LexicalScorer lexical;
    const ChunkScorer& chunk_scorer = scorer != nullptr ? *scorer : lexical;

    std::vector<ExampleRecord> records(examples.size());
    if (cfg.parallelism == 1 || examples.size() <= 1) {
        for (std::size_t i = 0; i < examples.size(); ++i) {
            records[i] = run_one(pipeline, examples[i], oracle_factory, generator, cfg,
                                 chunk_scorer);
        }
    } else {
        std::atomic<std::size_t> cursor{0};
        std::size_t workers = std::min(static_cast<std::size_t>(cfg.parallelism),
                                       examples.size());
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = cursor.fetch_add(1); i < examples.size();
                     i = cursor.fetch_add(1)) {
                    records[i] = run_one(pipeline, examples[i], oracle_factory, generator,
                                         cfg, chunk_scorer);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].id < records[b].id;
    });

    MetricReport report;
    report.pipeline = pipeline_name(pipeline);
    report.config_snapshot = {
        {"pipeline", pipeline_name(pipeline)},
        {"k", std::to_string(cfg.decode.k)},
        {"d", std::to_string(cfg.decode.d)},
        {"max_beta", std::to_string(cfg.decode.max_beta)},
        {"mode", cfg.decode.mode == DecodeMode::Deterministic ? "deterministic" : "stochastic"},
        {"seed", std::to_string(cfg.seed)},
        {"max_words", std::to_string(cfg.max_words)},
        {"top_n", std::to_string(cfg.top_n > 0 ? cfg.top_n : cfg.decode.k)},
        {"parallelism", std::to_string(cfg.parallelism)},
    };

    std::map<std::string, std::pair<double, int>> sums;  // dataset -> (sum, count)
    double total = 0.0;
    int counted = 0;
    for (std::size_t i : order) {
        ExampleRecord& rec = records[i];
        auto& slot = sums[rec.dataset_tag];
        if (rec.failed) {
            ++report.failures;
        } else {
            slot.first += rec.f1;
            ++slot.second;
            total += rec.f1;
            ++counted;
        }
        report.records.push_back(std::move(rec));
    }
    for (const auto& [dataset, sum_count] : sums) {
        report.mean_f1_by_dataset[dataset] =
            sum_count.second > 0
                ? std::optional<double>(sum_count.first / sum_count.second)
                : std::nullopt;
    }
    if (counted > 0) report.overall_mean_f1 = total / counted;
    return report;
}

std::string report_to_json(const MetricReport& report) {
    nlohmann::json by_dataset = nlohmann::json::object();
    for (const auto& [dataset, mean] : report.mean_f1_by_dataset) {
        if (mean.has_value()) {
            by_dataset[dataset] = *mean;
        } else {
            by_dataset[dataset] = nullptr;
        }
    }
    nlohmann::json examples = nlohmann::json::array();
    for (const ExampleRecord& rec : report.records) {
        examples.push_back({{"id", rec.id},
                            {"dataset", rec.dataset_tag},
                            {"evidence", rec.evidence},
                            {"prediction", rec.prediction},
                            {"f1", rec.f1},
                            {"failed", rec.failed},
                            {"error", rec.error},
                            {"diagnostics", diagnostics_json(rec.diagnostics)}});
    }
    nlohmann::json root = {{"pipeline", report.pipeline},
                           {"config", report.config_snapshot},
                           {"failures", report.failures},
                           {"mean_f1_by_dataset", by_dataset},
                           {"examples", examples}};
    if (report.overall_mean_f1.has_value()) {
        root["overall_mean_f1"] = *report.overall_mean_f1;
    } else {
        root["overall_mean_f1"] = nullptr;
    }
    return root.dump(2);
}

std::string report_table(const MetricReport& report) {
    std::ostringstream out;
    out << std::left << std::setw(14) << "pipeline";
    for (const auto& [dataset, _] : report.mean_f1_by_dataset) {
        out << std::setw(std::max<std::size_t>(dataset.size() + 2, 10)) << dataset;
    }
    out << "overall\n";
    out << std::setw(14) << report.pipeline;
    out << std::fixed << std::setprecision(4);
    for (const auto& [dataset, mean] : report.mean_f1_by_dataset) {
        std::ostringstream cell;
        if (mean.has_value()) {
            cell << std::fixed << std::setprecision(4) << *mean;
        } else {
            cell << "n/a";
        }
        out << std::setw(std::max<std::size_t>(dataset.size() + 2, 10)) << cell.str();
    }
    if (report.overall_mean_f1.has_value()) {
        out << *report.overall_mean_f1;
    } else {
        out << "n/a";
    }
    out << "\n";
    if (report.failures > 0) {
        out << "(" << report.failures << " failed example"
            << (report.failures == 1 ? "" : "s") << ")\n";
    }
    return out.str();
}

std::string TemplateQueryGenerator::make_query(const std::string& evidence) {
    std::map<std::string, int> counts;
    for (std::string_view w : text::split_words(evidence)) {
        std::string norm = text::normalize_word(w);
        if (norm.size() < 3 || text::is_stopword(norm)) continue;
        ++counts[norm];
    }
    std::vector<std::pair<std::string, int>> terms(counts.begin(), counts.end());
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
        return a.first < b.first;
    });
    if (terms.empty()) return "What is this passage about?";
    if (terms.size() == 1) {
        return "What does the article say about \"" + terms[0].first + "\"?";
    }
    return "What does the article say about \"" + terms[0].first + "\" and \"" +
           terms[1].first + "\"?";
}

std::vector<SftTriplet> sft_make(const std::vector<SourceDocument>& docs, const SftConfig& cfg,
                                 QueryGenerator& queries) {
    if (cfg.min_sentences < 1) throw ConfigError("min_sentences must be >= 1");
    if (cfg.max_sentences < cfg.min_sentences) {
        throw ConfigError("max_sentences must be >= min_sentences");
    }
    if (cfg.per_doc < 1) throw ConfigError("per_doc must be >= 1");

    std::mt19937_64 rng(cfg.seed);
    std::vector<SftTriplet> triplets;
    for (const SourceDocument& doc : docs) {
        SentenceMap map;
        try {
            map = segment_sentences(doc);
        } catch (const Error& err) {
            std::cerr << "warning: skipping document " << doc.doc_id() << ": " << err.what()
                      << "\n";
            continue;
        }
        const int n = static_cast<int>(map.size());
        for (int sample = 0; sample < cfg.per_doc; ++sample) {
            int len = cfg.min_sentences +
                      static_cast<int>(rng() % static_cast<std::uint64_t>(
                                                   cfg.max_sentences - cfg.min_sentences + 1));
            len = std::min(len, n);
            int start = static_cast<int>(rng() % static_cast<std::uint64_t>(n - len + 1));
            std::string evidence(
                doc.slice(map.at(start).char_start, map.at(start + len - 1).char_end));
            try {
                std::string query = queries.make_query(evidence);
                triplets.push_back(SftTriplet{query, doc.text(), std::move(evidence)});
            } catch (const std::exception& err) {
                std::cerr << "warning: query generation failed for " << doc.doc_id() << ": "
                          << err.what() << "\n";
            }
        }
    }
    return triplets;
}

void write_sft_jsonl(const std::string& path, const std::vector<SftTriplet>& triplets) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write SFT output: " + path);
    for (const SftTriplet& t : triplets) {
        out << nlohmann::json{{"query", t.query}, {"article", t.article}, {"evidence", t.evidence}}
                   .dump()
            << "\n";
    }
}

}  // namespace evex
