#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evex/token_space.hpp"

namespace evex {

// Half-open [start, end) range in unicode scalar units.
struct CharRange {
    std::size_t start = 0;
    std::size_t end = 0;

    bool operator==(const CharRange&) const = default;
};

/// A source article held verbatim. Extraction returns exact substrings of
/// `text`, so the stored copy is never normalized or case-folded. All offsets
/// in this project are unicode scalar indices into `text`.
class SourceDocument {
public:
    SourceDocument() = default;
    SourceDocument(std::string doc_id, std::string text);

    const std::string& doc_id() const { return doc_id_; }
    const std::string& text() const { return text_; }
    std::size_t byte_len() const { return text_.size(); }
    std::size_t char_len() const { return char_index_.empty() ? 0 : char_index_.size() - 1; }

    // Verbatim slice by char offsets.
    std::string_view slice(std::size_t char_start, std::size_t char_end) const;
    std::string_view slice(const CharRange& r) const { return slice(r.start, r.end); }

    std::size_t byte_offset(std::size_t char_offset) const { return char_index_[char_offset]; }

private:
    std::string doc_id_;
    std::string text_;
    std::vector<std::size_t> char_index_;  // char index -> byte offset, plus sentinel
};

struct SentenceRecord {
    int index = 0;
    std::size_t char_start = 0;
    std::size_t char_end = 0;  // exclusive
    int paragraph_index = 0;
};

/// Ordered, non-overlapping sentence ranges over a document. Slicing the
/// document by a record's range reproduces the sentence verbatim; anything
/// between consecutive ranges is inter-sentence whitespace.
struct SentenceMap {
    std::vector<SentenceRecord> sentences;

    std::size_t size() const { return sentences.size(); }
    bool empty() const { return sentences.empty(); }
    const SentenceRecord& at(int index) const { return sentences.at(static_cast<std::size_t>(index)); }

    std::string_view sentence_text(const SourceDocument& doc, int index) const {
        const auto& s = at(index);
        return doc.slice(s.char_start, s.char_end);
    }
};

struct SentenceTokens {
    int sentence_index = 0;
    std::vector<int> token_ids;
    std::vector<std::pair<std::size_t, std::size_t>> token_char_offsets;  // document char ranges
};

/// Per-sentence token sequences. Each sentence is tokenized independently
/// from its own first character, so a prefix of `token_ids` is always the
/// start of that sentence and never crosses a mid-token boundary.
struct TokenizedView {
    std::vector<SentenceTokens> sentences;

    std::size_t size() const { return sentences.size(); }
    bool empty() const { return sentences.empty(); }
    const SentenceTokens& at(int index) const { return sentences.at(static_cast<std::size_t>(index)); }
};

/// A rendered instruction prompt with the article and question substituted.
/// Slot ranges record where each substitution landed, in char units of
/// `rendered`; the raw strings may collide with template text, the ranges
/// cannot.
struct PromptEnvelope {
    std::string rendered;
    CharRange article_slot;
    CharRange question_slot;
};

struct SegmentationOptions {
    // Tokens (including the trailing period) after which a '.' never ends a
    // sentence. Matching is case-sensitive.
    std::vector<std::string> abbreviations;

    static SegmentationOptions defaults();
};

SentenceMap segment_sentences(const SourceDocument& doc,
                              const SegmentationOptions& opts = SegmentationOptions::defaults());

std::vector<CharRange> segment_paragraphs(const SourceDocument& doc);

TokenizedView tokenize_sentences(const SourceDocument& doc, const SentenceMap& map,
                                 const TokenSpace& space);

PromptEnvelope build_prompt(const std::string& question, const std::string& article);

// Document ingestion: a UTF-8 plain text file (one document, id = filename
// stem) or JSONL records {"doc_id": str, "text": str}.
std::vector<SourceDocument> load_documents(const std::string& path);

}  // namespace evex
