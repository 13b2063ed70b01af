#include "support/synthetic.hpp"

#include <algorithm>

#include "evex/text.hpp"

namespace evex::testsupport {

namespace {

// Small enough that prefixes collide constantly across sentences.
const std::vector<std::string> kPool = {
    "rock", "star",  "moon",    "river", "granite", "fern",  "lantern",
    "mist", "tide",  "ember",   "quill", "basalt",  "harp",  "cinder",
};

const std::vector<std::string> kUnicodePool = {"café", "naïve", "piñon"};

const std::vector<std::string> kTerminals = {".", ".", ".", "!", "?", "…"};

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

bool chance(std::mt19937_64& rng, double p) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p;
}

std::string pool_word(std::mt19937_64& rng, const RandomDocOptions& opts) {
    if (opts.unicode_words && chance(rng, 0.08)) {
        return kUnicodePool[pick(rng, kUnicodePool.size())];
    }
    return kPool[pick(rng, kPool.size())];
}

// Distinct capitalized openers; the numeric suffix keeps them unique past the
// base list without ever colliding with the plain pool words.
const std::vector<std::string> kStarterBase = {
    "Harbor",  "Meadow",  "Orchard", "Quarry",  "Willow", "Canyon", "Glacier",
    "Prairie", "Thicket", "Lagoon",  "Summit",  "Hollow", "Bluff",  "Estuary",
    "Grove",   "Ridge",   "Marsh",   "Terrace", "Knoll",  "Ravine", "Dune",
    "Fjord",   "Tundra",  "Delta",   "Mesa",    "Atoll",  "Cove",   "Plateau",
    "Basin",   "Cliff",   "Heath",   "Steppe",  "Glen",   "Creek",  "Butte",
    "Vale",    "Shoal",   "Cascade", "Bog",     "Crag",
};

std::string starter_word(int index) {
    const std::size_t n = kStarterBase.size();
    std::string w = kStarterBase[static_cast<std::size_t>(index) % n];
    if (static_cast<std::size_t>(index) >= n) {
        w += std::to_string(index / static_cast<int>(n));
    }
    return w;
}

// Filler vocabulary for planted articles. Deliberately disjoint from the
// starter list, the invented query terms, and every content word of the
// query template ("what", "field", "journal", "say", "about").
const std::vector<std::string> kFillerPool = {
    "stone",   "water",   "light",   "shadow",  "breeze",  "timber", "gravel",
    "meltline","footpath","boulder", "thermal", "current", "stratum","outcrop",
    "moraine", "sediment","horizon", "contour", "drift",   "furrow", "bedrock",
    "upland",  "lowland", "clearing","overhang","rainfall","snowmelt","topsoil",
    "subsoil", "loam",
};

const std::vector<std::string> kQueryTerms = {
    "zephyrite", "quartzvein", "obsidium", "galeweed",
    "frostgilt", "emberclay",  "duskspar", "tidemark",
};

struct TextBuilder {
    std::string text;
    std::size_t chars = 0;

    void append(std::string_view piece) {
        text += piece;
        chars += text::char_length(piece);
    }
};

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += words[i];
    }
    return out;
}

}  // namespace

SourceDocument make_random_doc(std::mt19937_64& rng, const RandomDocOptions& opts,
                               const std::string& doc_id) {
    const int span = opts.max_sentences - opts.min_sentences + 1;
    const int n = opts.min_sentences + static_cast<int>(pick(rng, static_cast<std::size_t>(span)));

    std::vector<std::vector<std::string>> produced;  // word lists, terminal attached
    std::vector<std::vector<std::string>> tails;     // unterminated word lists
    std::string out;
    bool at_paragraph_start = true;

    for (int i = 0; i < n; ++i) {
        std::vector<std::string> words;
        if (i > 0 && !produced.empty() && chance(rng, opts.reuse_chance)) {
            words = produced[pick(rng, produced.size())];
        } else if (!tails.empty() && chance(rng, opts.extend_chance)) {
            // Extend an earlier unterminated tail so its token sequence
            // becomes a strict prefix of this sentence's.
            words = tails[pick(rng, tails.size())];
            int extra = 1 + static_cast<int>(pick(rng, 3));
            for (int e = 0; e < extra; ++e) words.push_back(pool_word(rng, opts));
            words.back() += kTerminals[pick(rng, kTerminals.size())];
        } else {
            const int wspan = opts.max_words - opts.min_words + 1;
            const int count =
                opts.min_words + static_cast<int>(pick(rng, static_cast<std::size_t>(wspan)));
            for (int w = 0; w < count; ++w) words.push_back(pool_word(rng, opts));
            words.back() += kTerminals[pick(rng, kTerminals.size())];
        }

        bool last = i + 1 == n;
        bool close_paragraph = last || chance(rng, opts.paragraph_chance);
        if (close_paragraph && chance(rng, opts.unterminated_chance)) {
            // Strip the terminal: the paragraph break closes the sentence.
            std::vector<std::string> bare = words;
            std::string& w = bare.back();
            if (w.size() >= 3 && w.compare(w.size() - 3, 3, "…") == 0) {
                w.erase(w.size() - 3);
            }
            while (!w.empty() && !std::isalnum(static_cast<unsigned char>(w.back())) &&
                   static_cast<unsigned char>(w.back()) < 128) {
                w.pop_back();
            }
            if (w.empty()) w = pool_word(rng, opts);
            words = bare;
            tails.push_back(words);
        } else {
            produced.push_back(words);
        }

        if (!at_paragraph_start) out.push_back(' ');
        out += join_words(words);
        at_paragraph_start = false;
        if (close_paragraph && !last) {
            out += "\n\n";
            at_paragraph_start = true;
        }
    }
    return SourceDocument(doc_id, out);
}

std::string make_pool_query(std::mt19937_64& rng) {
    std::string a = kPool[pick(rng, kPool.size())];
    std::string b = kPool[pick(rng, kPool.size())];
    return "Which passage talks of " + a + " and " + b + "?";
}

PlantedDoc make_planted_doc(std::mt19937_64& rng, const PlantedOptions& opts,
                            const std::string& doc_id) {
    std::size_t t0 = pick(rng, kQueryTerms.size());
    std::size_t t1 = (t0 + 1 + pick(rng, kQueryTerms.size() - 1)) % kQueryTerms.size();
    const std::string& term_a = kQueryTerms[t0];
    const std::string& term_b = kQueryTerms[t1];

    auto filler_word = [&] { return kFillerPool[pick(rng, kFillerPool.size())]; };

    auto filler_sentence = [&](int index) {
        std::vector<std::string> words{starter_word(index)};
        const int span = opts.filler_words_max - opts.filler_words_min + 1;
        const int count = opts.filler_words_min +
                          static_cast<int>(pick(rng, static_cast<std::size_t>(span)));
        for (int w = 1; w < count; ++w) words.push_back(filler_word());
        words.back() += ".";
        return join_words(words);
    };

    auto evidence_sentence = [&](int index, int ordinal) {
        std::vector<std::string> words{starter_word(index)};
        for (int w = 1; w < opts.evidence_words; ++w) words.push_back(filler_word());
        // At least one query term per evidence sentence, never in the
        // sentence-initial slot.
        const std::string& term = ordinal % 2 == 0 ? term_a : term_b;
        std::size_t slot = 1 + pick(rng, words.size() - 1);
        if (slot >= words.size()) slot = words.size() - 1;
        words[slot] = term;
        words.back() += ".";
        return join_words(words);
    };

    const int total = opts.filler_before + opts.evidence_sentences + opts.filler_after;
    PlantedDoc planted;
    planted.evidence_start_sentence = opts.filler_before;
    planted.evidence_end_sentence = opts.filler_before + opts.evidence_sentences - 1;

    TextBuilder builder;
    for (int i = 0; i < total; ++i) {
        if (i > 0) {
            bool break_here = opts.paragraph_every > 0 && i % opts.paragraph_every == 0;
            builder.append(break_here ? "\n\n" : " ");
        }
        bool in_evidence = i >= planted.evidence_start_sentence &&
                           i <= planted.evidence_end_sentence;
        std::string sentence = in_evidence
                                   ? evidence_sentence(i, i - planted.evidence_start_sentence)
                                   : filler_sentence(i);
        if (i == planted.evidence_start_sentence) planted.evidence_char_start = builder.chars;
        builder.append(sentence);
        if (i == planted.evidence_end_sentence) planted.evidence_char_end = builder.chars;
    }

    planted.doc = SourceDocument(doc_id, builder.text);
    planted.query = "What do the field journal entries say about " + term_a + " and " +
                    term_b + "?";
    planted.evidence = std::string(
        planted.doc.slice(planted.evidence_char_start, planted.evidence_char_end));
    return planted;
}

EvalExample planted_example(const PlantedDoc& planted, const std::string& dataset_tag) {
    EvalExample ex;
    ex.id = planted.doc.doc_id();
    ex.dataset_tag = dataset_tag;
    ex.query = planted.query;
    ex.article = planted.doc.text();
    ex.gold_answers = {planted.evidence};
    return ex;
}

std::vector<EvalExample> planted_corpus(std::uint64_t seed, int count,
                                        const PlantedOptions& base,
                                        const std::string& dataset_tag) {
    std::mt19937_64 rng(seed);
    std::vector<EvalExample> examples;
    examples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        PlantedOptions opts = base;
        opts.filler_before = std::max(3, base.filler_before - 2 + static_cast<int>(pick(rng, 5)));
        opts.filler_after = std::max(3, base.filler_after - 2 + static_cast<int>(pick(rng, 5)));
        if (base.paragraph_every == 0 && i % 3 == 2) opts.paragraph_every = 4;
        PlantedDoc planted =
            make_planted_doc(rng, opts, dataset_tag + "-" + std::to_string(i));
        examples.push_back(planted_example(planted, dataset_tag));
    }
    return examples;
}

}  // namespace evex::testsupport
