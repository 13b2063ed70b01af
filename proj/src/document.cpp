#include "evex/document.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "evex/errors.hpp"
#include "evex/text.hpp"

namespace evex {

namespace {

constexpr char32_t kEllipsis = U'…';

bool is_terminal(char32_t c) {
    return c == U'.' || c == U'!' || c == U'?' || c == kEllipsis;
}

struct ScalarView {
    std::vector<char32_t> scalars;
    std::vector<std::size_t> byte_index;  // per scalar, plus sentinel

    explicit ScalarView(std::string_view utf8) {
        byte_index = text::char_to_byte_index(utf8);
        scalars.reserve(byte_index.size() - 1);
        std::size_t pos = 0;
        while (pos < utf8.size()) {
            scalars.push_back(text::decode_scalar(utf8, pos));
        }
    }

    std::size_t size() const { return scalars.size(); }
};

}  // namespace

SourceDocument::SourceDocument(std::string doc_id, std::string text)
    : doc_id_(std::move(doc_id)), text_(std::move(text)) {
    char_index_ = text::char_to_byte_index(text_);
}

std::string_view SourceDocument::slice(std::size_t char_start, std::size_t char_end) const {
    std::size_t b0 = char_index_.at(char_start);
    std::size_t b1 = char_index_.at(char_end);
    return std::string_view(text_).substr(b0, b1 - b0);
}

SegmentationOptions SegmentationOptions::defaults() {
    return SegmentationOptions{{
        "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "St.", "Mt.", "vs.", "etc.",
        "e.g.", "i.e.", "Jr.", "Sr.", "Inc.", "Ltd.", "Co.", "No.", "Fig.",
        "Vol.", "U.S.", "U.K.", "approx.",
    }};
}

std::vector<CharRange> segment_paragraphs(const SourceDocument& doc) {
    ScalarView view(doc.text());
    std::vector<CharRange> paragraphs;
    std::size_t line_start = 0;
    for (std::size_t i = 0; i <= view.size(); ++i) {
        if (i == view.size() || view.scalars[i] == U'\n') {
            std::size_t a = line_start;
            std::size_t b = i;
            while (a < b && text::is_ascii_space(view.scalars[a])) ++a;
            while (b > a && text::is_ascii_space(view.scalars[b - 1])) --b;
            if (a < b) paragraphs.push_back({a, b});
            line_start = i + 1;
        }
    }
    return paragraphs;
}

SentenceMap segment_sentences(const SourceDocument& doc, const SegmentationOptions& opts) {
    ScalarView view(doc.text());

    bool all_space = true;
    for (char32_t c : view.scalars) {
        if (!text::is_ascii_space(c)) {
            all_space = false;
            break;
        }
    }
    if (view.scalars.empty() || all_space) {
        throw EmptyDocument();
    }

    auto token_ending_at = [&](std::size_t dot, std::size_t lower_bound) {
        std::size_t k = dot;
        while (k > lower_bound && !text::is_ascii_space(view.scalars[k - 1])) --k;
        std::size_t b0 = view.byte_index[k];
        std::size_t b1 = view.byte_index[dot + 1];
        return std::string_view(doc.text()).substr(b0, b1 - b0);
    };

    auto is_abbreviation = [&](std::size_t dot, std::size_t lower_bound) {
        auto token = token_ending_at(dot, lower_bound);
        return std::find(opts.abbreviations.begin(), opts.abbreviations.end(), token) !=
               opts.abbreviations.end();
    };

    std::vector<CharRange> paragraphs = segment_paragraphs(doc);
    SentenceMap map;
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
        const auto [pstart, pend] = paragraphs[p];
        std::size_t i = pstart;
        while (i < pend) {
            while (i < pend && text::is_ascii_space(view.scalars[i])) ++i;
            if (i >= pend) break;
            std::size_t start = i;
            std::size_t end = pend;  // paragraph end closes an unterminated sentence
            for (std::size_t j = i; j < pend; ++j) {
                char32_t c = view.scalars[j];
                if (!is_terminal(c)) continue;
                bool at_boundary = (j + 1 >= pend) || text::is_ascii_space(view.scalars[j + 1]);
                if (!at_boundary) continue;
                if (c == U'.' && is_abbreviation(j, pstart)) continue;
                end = j + 1;
                break;
            }
            map.sentences.push_back({static_cast<int>(map.sentences.size()), start, end,
                                     static_cast<int>(p)});
            i = end;
        }
    }
    if (map.sentences.empty()) {
        throw EmptyDocument("document contains no sentences");
    }
    return map;
}

TokenizedView tokenize_sentences(const SourceDocument& doc, const SentenceMap& map,
                                 const TokenSpace& space) {
    TokenizedView view;
    view.sentences.reserve(map.size());
    for (const auto& rec : map.sentences) {
        std::string_view sentence = doc.slice(rec.char_start, rec.char_end);
        SentenceTokens st;
        st.sentence_index = rec.index;
        st.token_ids = space.encode(sentence);

        // Align each decoded piece back onto the sentence bytes. Whitespace
        // between pieces is skipped; a piece that cannot be matched at the
        // current position means the space's output does not describe this
        // sentence.
        std::size_t byte_pos = 0;
        std::size_t char_pos = 0;
        auto skip_ws = [&] {
            while (byte_pos < sentence.size() &&
                   std::isspace(static_cast<unsigned char>(sentence[byte_pos]))) {
                ++byte_pos;
                ++char_pos;
            }
        };
        for (int id : st.token_ids) {
            std::string piece = space.piece(id);
            if (piece.empty()) {
                throw TokenizationMismatch("empty piece for token id " + std::to_string(id));
            }
            if (sentence.compare(byte_pos, piece.size(), piece) != 0) {
                skip_ws();
                if (sentence.compare(byte_pos, piece.size(), piece) != 0) {
                    throw TokenizationMismatch(
                        "piece \"" + piece + "\" does not align with sentence " +
                        std::to_string(rec.index));
                }
            }
            std::size_t piece_chars = text::char_length(piece);
            st.token_char_offsets.emplace_back(rec.char_start + char_pos,
                                               rec.char_start + char_pos + piece_chars);
            byte_pos += piece.size();
            char_pos += piece_chars;
        }
        skip_ws();
        if (byte_pos != sentence.size()) {
            throw TokenizationMismatch("unmatched trailing text in sentence " +
                                       std::to_string(rec.index));
        }
        view.sentences.push_back(std::move(st));
    }
    return view;
}

namespace {

constexpr std::string_view kPromptHead =
    "Below is an article, read the article and answer my question after the article.\n"
    "Now the article begins:\n";
constexpr std::string_view kPromptMid =
    "\nNow the article ends.\n"
    "Select several sentences from the article to answer my question.\n"
    "Question: ";

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

PromptEnvelope build_prompt(const std::string& question, const std::string& article) {
    if (question.empty() || blank(question)) throw EmptySlot("question slot is empty");
    if (article.empty() || blank(article)) throw EmptySlot("article slot is empty");

    PromptEnvelope env;
    env.rendered.reserve(kPromptHead.size() + article.size() + kPromptMid.size() + question.size());
    env.rendered += kPromptHead;
    std::size_t article_start = text::char_length(env.rendered);
    env.rendered += article;
    env.article_slot = {article_start, article_start + text::char_length(article)};
    env.rendered += kPromptMid;
    std::size_t question_start = env.article_slot.end + text::char_length(kPromptMid);
    env.rendered += question;
    env.question_slot = {question_start, question_start + text::char_length(question)};
    return env;
}

std::vector<SourceDocument> load_documents(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open document file: " + path);
    }
    std::vector<SourceDocument> docs;
    if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl") {
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || blank(line)) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (!j.contains("text") || !j["text"].is_string()) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": missing \"text\" field");
            }
            std::string id = j.value("doc_id", "doc-" + std::to_string(lineno));
            docs.emplace_back(std::move(id), j["text"].get<std::string>());
        }
    } else {
        std::ostringstream buf;
        buf << in.rdbuf();
        docs.emplace_back(std::filesystem::path(path).stem().string(), buf.str());
    }
    return docs;
}

}  // namespace evex
