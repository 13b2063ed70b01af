#include "evex/chunking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "evex/errors.hpp"
#include "evex/text.hpp"

namespace evex {

namespace {

std::set<std::string> normalized_terms(std::string_view s) {
    std::set<std::string> terms;
    for (std::string_view w : text::split_words(s)) {
        std::string norm = text::normalize_word(w);
        if (!norm.empty()) terms.insert(std::move(norm));
    }
    return terms;
}

Chunk make_chunk(const SourceDocument& doc, std::size_t char_start, std::size_t char_end,
                 int sentence_start, int sentence_end) {
    Chunk c;
    c.char_start = char_start;
    c.char_end = char_end;
    c.sentence_start = sentence_start;
    c.sentence_end = sentence_end;
    c.text = std::string(doc.slice(char_start, char_end));
    c.word_count = static_cast<int>(text::count_words(c.text));
    return c;
}

}  // namespace

std::vector<Chunk> chunk_sliding_window(const SentenceMap& map, const SourceDocument& doc,
                                        int max_words) {
    if (map.empty()) throw EmptyView("sliding-window chunker needs a non-empty sentence map");
    if (max_words < 1) throw ConfigError("max_words must be >= 1");

    std::vector<std::size_t> words(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        words[i] = text::count_words(map.sentence_text(doc, static_cast<int>(i)));
    }

    std::vector<Chunk> chunks;
    for (int start = 0; static_cast<std::size_t>(start) < map.size(); ++start) {
        std::size_t total = words[static_cast<std::size_t>(start)];
        int end = start;
        while (static_cast<std::size_t>(end + 1) < map.size() &&
               total + words[static_cast<std::size_t>(end + 1)] <=
                   static_cast<std::size_t>(max_words)) {
            ++end;
            total += words[static_cast<std::size_t>(end)];
        }
        if (!chunks.empty() && chunks.back().sentence_start == start &&
            chunks.back().sentence_end == end) {
            continue;  // identical range; cannot happen with distinct starts
        }
        Chunk c = make_chunk(doc, map.at(start).char_start, map.at(end).char_end, start, end);
        c.over_limit = start == end && total > static_cast<std::size_t>(max_words);
        chunks.push_back(std::move(c));
    }
    return chunks;
}

std::vector<Chunk> chunk_paragraphs(const std::vector<CharRange>& paragraphs,
                                    const SourceDocument& doc, const SentenceMap* map) {
    std::vector<Chunk> chunks;
    chunks.reserve(paragraphs.size());
    for (const CharRange& p : paragraphs) {
        Chunk c = make_chunk(doc, p.start, p.end, -1, -1);
        if (map != nullptr) {
            for (const SentenceRecord& s : map->sentences) {
                if (s.char_start >= p.start && s.char_end <= p.end) {
                    if (c.sentence_start < 0) c.sentence_start = s.index;
                    c.sentence_end = s.index;
                }
            }
        }
        chunks.push_back(std::move(c));
    }
    return chunks;
}

std::vector<double> LexicalScorer::score(const std::string& query,
                                         const std::vector<Chunk>& chunks) const {
    std::vector<std::set<std::string>> chunk_terms;
    chunk_terms.reserve(chunks.size());
    for (const Chunk& c : chunks) chunk_terms.push_back(normalized_terms(c.text));

    std::map<std::string, int> df;
    for (const auto& terms : chunk_terms) {
        for (const std::string& t : terms) ++df[t];
    }
    const double n = static_cast<double>(chunks.size());
    auto idf = [&](const std::string& term) {
        auto it = df.find(term);
        double hits = it == df.end() ? 0.0 : static_cast<double>(it->second);
        return std::log((n + 1.0) / (hits + 1.0)) + 1.0;
    };

    std::set<std::string> query_terms = normalized_terms(query);
    double denom = 0.0;
    for (const std::string& t : query_terms) denom += idf(t);

    std::vector<double> scores(chunks.size(), 0.0);
    if (denom <= 0.0) return scores;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        double overlap = 0.0;
        for (const std::string& t : query_terms) {
            if (chunk_terms[i].count(t) > 0) overlap += idf(t);
        }
        scores[i] = overlap / denom;
    }
    return scores;
}

std::vector<RerankedChunk> rerank(const std::string& query, const std::vector<Chunk>& chunks,
                                  const ChunkScorer& scorer) {
    std::vector<double> scores = scorer.score(query, chunks);
    if (scores.size() != chunks.size()) {
        throw OracleFailure("scorer returned " + std::to_string(scores.size()) +
                            " scores for " + std::to_string(chunks.size()) + " chunks");
    }
    std::vector<RerankedChunk> out;
    out.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        out.push_back(RerankedChunk{chunks[i], scores[i]});
    }
    std::stable_sort(out.begin(), out.end(), [](const RerankedChunk& a, const RerankedChunk& b) {
        return a.score > b.score;
    });
    return out;
}

}  // namespace evex
