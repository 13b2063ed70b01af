#pragma once

#include <string>
#include <vector>

#include "evex/document.hpp"

namespace evex {

/// A contiguous run of whole sentences (or one paragraph), verbatim from the
/// document. `word_count` counts whitespace-separated words of the raw text.
struct Chunk {
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    int sentence_start = -1;
    int sentence_end = -1;  // inclusive; -1 when the chunker has no sentence map
    int word_count = 0;
    bool over_limit = false;  // a single sentence alone exceeded max_words
};

struct RerankedChunk {
    Chunk chunk;
    double score = 0.0;
};

/// Relevance scorer over a fixed chunk collection. Implementations score all
/// chunks in one batch; scores are comparable only within a batch.
class ChunkScorer {
public:
    virtual ~ChunkScorer() = default;
    virtual std::vector<double> score(const std::string& query,
                                      const std::vector<Chunk>& chunks) const = 0;
};

/// Hermetic default scorer: idf-weighted overlap between the query's words
/// and the chunk's, idf computed over the chunk collection itself
/// (idf = ln((N+1)/(df+1)) + 1), normalized by the query's total idf mass.
class LexicalScorer : public ChunkScorer {
public:
    std::vector<double> score(const std::string& query,
                              const std::vector<Chunk>& chunks) const override;
};

/// One chunk per starting sentence: greedily appends following sentences
/// while the chunk stays within max_words. A start sentence that alone
/// exceeds the limit becomes its own over-limit chunk. Identical trailing
/// ranges are deduplicated, so consecutive chunks advance by one sentence.
std::vector<Chunk> chunk_sliding_window(const SentenceMap& map, const SourceDocument& doc,
                                        int max_words = 256);

/// One chunk per paragraph. Sentence ranges are filled when a map is given.
std::vector<Chunk> chunk_paragraphs(const std::vector<CharRange>& paragraphs,
                                    const SourceDocument& doc, const SentenceMap* map = nullptr);

/// Scores every chunk and sorts descending; ties keep input order. The
/// caller takes however many top chunks it wants.
std::vector<RerankedChunk> rerank(const std::string& query, const std::vector<Chunk>& chunks,
                                  const ChunkScorer& scorer);

}  // namespace evex
