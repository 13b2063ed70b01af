#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "evex/document.hpp"
#include "evex/eval.hpp"

namespace evex::testsupport {

/// Article whose sentences draw from a small word pool, so token prefixes
/// collide often. Knobs force the awkward shapes the indexer has to survive:
/// verbatim repeats, unterminated paragraph tails, sentences that extend an
/// earlier tail (making one token sequence a strict prefix of another),
/// multi-byte words and '…' terminals.
struct RandomDocOptions {
    int min_sentences = 5;
    int max_sentences = 50;
    int min_words = 1;
    int max_words = 6;
    double reuse_chance = 0.15;        // repeat an earlier sentence verbatim
    double extend_chance = 0.5;        // continue an unterminated tail, if any
    double paragraph_chance = 0.25;    // close the paragraph after a sentence
    double unterminated_chance = 0.3;  // paragraph-final sentence keeps no terminal
    bool unicode_words = true;
};

SourceDocument make_random_doc(std::mt19937_64& rng, const RandomDocOptions& opts,
                               const std::string& doc_id);

/// Query over two words from the same pool, so relevance scoring has
/// something to latch onto in a pool-built article.
std::string make_pool_query(std::mt19937_64& rng);

/// Article with a contiguous run of "evidence" sentences planted among
/// filler. Construction guarantees, relied on by the end-to-end expectations:
///   * every sentence starts with a word used nowhere else in the article,
///     so sentence-start competition is decided by relevance alone;
///   * the query's content words appear in evidence sentences only, at least
///     one per evidence sentence, so the [eos] odds peak exactly at the end
///     of the evidence run;
///   * filler vocabulary avoids every content word of the generated query.
struct PlantedOptions {
    int filler_before = 10;
    int filler_after = 10;
    int evidence_sentences = 3;  // >= 3 keeps the default top-3 inside the run
    int evidence_words = 10;
    int filler_words_min = 6;
    int filler_words_max = 10;
    int paragraph_every = 0;  // 0 = single paragraph, n > 0 = break every n sentences
};

struct PlantedDoc {
    SourceDocument doc;
    std::string query;
    std::string evidence;  // verbatim slice covering the evidence run
    int evidence_start_sentence = 0;
    int evidence_end_sentence = 0;
    std::size_t evidence_char_start = 0;
    std::size_t evidence_char_end = 0;
};

PlantedDoc make_planted_doc(std::mt19937_64& rng, const PlantedOptions& opts,
                            const std::string& doc_id);

/// Wraps a planted article as an eval example whose single gold answer is the
/// evidence run itself, so answer overlap measures extraction quality.
EvalExample planted_example(const PlantedDoc& planted, const std::string& dataset_tag);

/// Batch of planted examples with per-example randomized filler geometry.
std::vector<EvalExample> planted_corpus(std::uint64_t seed, int count,
                                        const PlantedOptions& base,
                                        const std::string& dataset_tag);

}  // namespace evex::testsupport
