#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "evex/errors.hpp"
#include "evex/extraction.hpp"
#include "evex/mock_oracles.hpp"
#include "evex/prefix_trie.hpp"
#include "support/reference.hpp"
#include "support/synthetic.hpp"

using namespace evex;

namespace {

TokenizedView view_of(const std::vector<std::vector<int>>& sentences) {
    TokenizedView view;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        SentenceTokens st;
        st.sentence_index = static_cast<int>(i);
        st.token_ids = sentences[i];
        for (std::size_t t = 0; t < st.token_ids.size(); ++t) {
            st.token_char_offsets.emplace_back(t, t + 1);
        }
        view.sentences.push_back(std::move(st));
    }
    return view;
}

ScriptedOracle scripted(std::map<std::vector<int>, ScriptedOracle::Distribution> table,
                        bool fallback = false, int vocab = 16) {
    return ScriptedOracle(vocab, 0, std::move(table), fallback);
}

const std::vector<int> kPromptCtx{7};

}  // namespace

TEST_CASE("deterministic decoding walks every branch and ranks by mean logprob") {
    TokenizedView view = view_of({{1, 2}, {1, 3}, {4}});
    PrefixTrie trie = build_trie(view, 16);
    ScriptedOracle oracle = scripted({
        {{7}, {{1, -0.2}, {4, -2.0}}},
        {{7, 1}, {{2, -0.5}, {3, -1.0}}},
    });

    DecodeConfig cfg;
    ExtractionDiagnostics diag;
    auto candidates = decode_prefix_candidates(trie, oracle, kPromptCtx, cfg, &diag);

    REQUIRE(candidates.size() == 3);
    CHECK(candidates[0].resolved_sentence == 0);
    CHECK(candidates[0].token_ids == std::vector<int>{1, 2});
    CHECK(candidates[0].per_token_logprobs == std::vector<double>{-0.2, -0.5});
    CHECK(candidates[0].score == doctest::Approx(-0.35).epsilon(1e-15));
    CHECK(candidates[0].beta() == 2);

    CHECK(candidates[1].resolved_sentence == 1);
    CHECK(candidates[1].score == doctest::Approx(-0.6).epsilon(1e-15));

    CHECK(candidates[2].resolved_sentence == 2);
    CHECK(candidates[2].token_ids == std::vector<int>{4});
    CHECK(candidates[2].beta() == 1);

    CHECK(diag.candidates_expanded == 2);  // root and the shared [1] node
    CHECK(oracle.calls() == 2);
    CHECK(diag.beta_per_candidate == std::vector<int>{1, 2, 2});
}

TEST_CASE("k keeps only the best-scoring resolutions") {
    TokenizedView view = view_of({{1, 2}, {1, 3}, {4}});
    PrefixTrie trie = build_trie(view, 16);
    ScriptedOracle oracle = scripted({
        {{7}, {{1, -0.2}, {4, -2.0}}},
        {{7, 1}, {{2, -0.5}, {3, -1.0}}},
    });

    DecodeConfig cfg;
    cfg.k = 2;
    auto candidates = decode_prefix_candidates(trie, oracle, kPromptCtx, cfg);
    REQUIRE(candidates.size() == 2);
    CHECK(candidates[0].resolved_sentence == 0);
    CHECK(candidates[1].resolved_sentence == 1);
}

TEST_CASE("duplicate sentences collapse into one candidate with alternates") {
    TokenizedView view = view_of({{5, 6}, {5, 6}});
    PrefixTrie trie = build_trie(view, 16);
    ScriptedOracle oracle = scripted({
        {{7}, {{5, -0.3}}},
        {{7, 5}, {{6, -0.4}}},
    });

    auto candidates = decode_prefix_candidates(trie, oracle, kPromptCtx, DecodeConfig{});
    REQUIRE(candidates.size() == 1);
    CHECK(candidates[0].resolved_sentence == 0);
    CHECK(candidates[0].alternates == std::vector<int>{1});
    CHECK(candidates[0].beta() == 2);
}

TEST_CASE("a sentence that prefixes another resolves without stopping the walk") {
    TokenizedView view = view_of({{5, 6}, {5, 6, 9}});
    PrefixTrie trie = build_trie(view, 16);
    ScriptedOracle oracle = scripted({
        {{7}, {{5, -0.3}}},
        {{7, 5}, {{6, -0.4}}},
        {{7, 5, 6}, {{9, -0.1}}},
    });

    auto candidates = decode_prefix_candidates(trie, oracle, kPromptCtx, DecodeConfig{});
    REQUIRE(candidates.size() == 2);
    // The longer sentence carries the better mean, so it ranks first.
    CHECK(candidates[0].resolved_sentence == 1);
    CHECK(candidates[0].token_ids == std::vector<int>{5, 6, 9});
    CHECK(candidates[1].resolved_sentence == 0);
    CHECK(candidates[1].token_ids == std::vector<int>{5, 6});
    CHECK(candidates[1].alternates.empty());
}

TEST_CASE("the walk depth limit forces earliest-sentence resolution") {
    TokenizedView view = view_of({{1, 2, 3, 4}, {1, 2, 3, 5}});
    PrefixTrie trie = build_trie(view, 2);
    ScriptedOracle oracle = scripted({
        {{7}, {{1, -0.2}}},
        {{7, 1}, {{2, -0.5}}},
    });

    DecodeConfig cfg;
    cfg.max_beta = 2;
    auto candidates = decode_prefix_candidates(trie, oracle, kPromptCtx, cfg);
    REQUIRE(candidates.size() == 1);
    CHECK(candidates[0].resolved_sentence == 0);
    CHECK(candidates[0].alternates == std::vector<int>{1});
    CHECK(candidates[0].beta() == 2);
}

TEST_CASE("the expansion budget resolves still-open paths instead of dropping them") {
    TokenizedView view = view_of({{1, 2}, {1, 3}, {4, 2}, {4, 5}});
    PrefixTrie trie = build_trie(view, 16);
    ScriptedOracle oracle = scripted({
        {{7}, {{1, -0.2}, {4, -0.9}}},
    });

    DecodeConfig cfg;
    cfg.max_candidates_expanded = 1;
    ExtractionDiagnostics diag;
    auto candidates = decode_prefix_candidates(trie, oracle, kPromptCtx, cfg, &diag);

    CHECK(diag.candidates_expanded == 1);
    REQUIRE(candidates.size() == 2);
    CHECK(candidates[0].resolved_sentence == 0);  // -0.2 beats -0.9
    CHECK(candidates[0].alternates == std::vector<int>{1});
    CHECK(candidates[0].beta() == 1);
    CHECK(candidates[1].resolved_sentence == 2);
    CHECK(candidates[1].alternates == std::vector<int>{3});
}

TEST_CASE("deterministic decoding matches brute-force enumeration on pool articles") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        testsupport::RandomDocOptions opts;
        opts.max_sentences = 18;
        SourceDocument doc =
            testsupport::make_random_doc(rng, opts, "pool-" + std::to_string(seed));
        RelevanceOracle oracle(testsupport::make_pool_query(rng), doc);

        DecodeConfig cfg;
        cfg.k = 4;
        cfg.max_candidates_expanded = 100000;
        PrefixTrie trie = build_trie(oracle.tokenized_view(), cfg.max_beta);
        auto got = decode_prefix_candidates(trie, oracle, oracle.prompt_ids(), cfg);
        auto want = testsupport::enumerate_prefix_candidates(
            oracle.tokenized_view(), oracle, oracle.prompt_ids(), cfg.k, cfg.max_beta);

        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].resolved_sentence == want[i].sentence);
            CHECK(got[i].token_ids == want[i].token_ids);
            CHECK(got[i].per_token_logprobs == want[i].logprobs);
            CHECK(got[i].score == want[i].score);
            CHECK(got[i].alternates == want[i].alternates);
        }
    }
}

TEST_CASE("stochastic decoding is reproducible and stays inside the trie") {
    std::mt19937_64 rng(11);
    testsupport::RandomDocOptions opts;
    opts.min_sentences = 10;
    opts.max_sentences = 25;
    SourceDocument doc = testsupport::make_random_doc(rng, opts, "stoch");
    RelevanceOracle oracle(testsupport::make_pool_query(rng), doc);

    DecodeConfig cfg;
    cfg.mode = DecodeMode::Stochastic;
    cfg.seed = 99;
    cfg.max_candidates_expanded = 100000;
    PrefixTrie trie = build_trie(oracle.tokenized_view(), cfg.max_beta);

    auto first = decode_prefix_candidates(trie, oracle, oracle.prompt_ids(), cfg);
    auto second = decode_prefix_candidates(trie, oracle, oracle.prompt_ids(), cfg);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].resolved_sentence == second[i].resolved_sentence);
        CHECK(first[i].token_ids == second[i].token_ids);
        CHECK(first[i].score == second[i].score);
    }

    // Every sampled candidate is also in the exhaustive enumeration.
    auto all = testsupport::enumerate_prefix_candidates(
        oracle.tokenized_view(), oracle, oracle.prompt_ids(),
        static_cast<int>(oracle.tokenized_view().size()), cfg.max_beta);
    for (const auto& cand : first) {
        bool found = false;
        for (const auto& ref : all) {
            if (ref.sentence == cand.resolved_sentence && ref.token_ids == cand.token_ids &&
                ref.score == cand.score) {
                found = true;
                break;
            }
        }
        CHECK_MESSAGE(found, "sampled candidate missing from the exhaustive set");
    }
}

TEST_CASE("decode configuration bounds are enforced") {
    DecodeConfig cfg;
    cfg.k = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DecodeConfig{};
    cfg.d = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DecodeConfig{};
    cfg.max_beta = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DecodeConfig{};
    cfg.max_candidates_expanded = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DecodeConfig{};
    cfg.max_context_tokens = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

namespace {

struct SkipFixture {
    SourceDocument doc;
    SentenceMap map;
    std::shared_ptr<WhitespaceTokenSpace> space;
    TokenizedView view;

    explicit SkipFixture(const std::string& text)
        : doc("d", text),
          map(segment_sentences(doc)),
          space(std::make_shared<WhitespaceTokenSpace>(std::vector<std::string>{text})),
          view(tokenize_sentences(doc, map, *space)) {}
};

PrefixCandidate candidate_for(const TokenizedView& view, int sentence, std::size_t beta,
                              double score) {
    PrefixCandidate c;
    const auto& ids = view.at(sentence).token_ids;
    c.token_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(beta));
    c.per_token_logprobs.assign(beta, score);
    c.score = score;
    c.resolved_sentence = sentence;
    return c;
}

}  // namespace

TEST_CASE("boundary probing ends the span where eos peaks") {
    SkipFixture fx("alpha beta. gamma delta. epsilon zeta.");
    // Token ids follow first-seen order: alpha=1 beta.=2 gamma=3 delta.=4 ...
    ScriptedOracle oracle = scripted(
        {
            {{1, 2}, {{0, -2.0}}},
            {{1, 2, 3, 4}, {{0, -0.5}}},
            {{1, 2, 3, 4, 5, 6}, {{0, -1.5}}},
        },
        false, 7);

    PrefixCandidate cand = candidate_for(fx.view, 0, 1, -0.25);
    EvidenceSpan span = skip_decode(cand, fx.doc, fx.map, fx.view, oracle, {}, DecodeConfig{});
    CHECK(span.start_sentence == 0);
    CHECK(span.end_sentence == 1);
    CHECK(span.text == "alpha beta. gamma delta.");
    CHECK(span.eos_logprob == -0.5);
    CHECK(span.prefix_score == -0.25);
    CHECK(!span.truncated);
    CHECK(oracle.calls() == 1);  // one batched probe for all boundaries
}

TEST_CASE("equal eos mass keeps the earliest boundary") {
    SkipFixture fx("alpha beta. gamma delta. epsilon zeta.");
    ScriptedOracle oracle = scripted(
        {
            {{1, 2}, {{0, -0.5}}},
            {{1, 2, 3, 4}, {{0, -0.5}}},
            {{1, 2, 3, 4, 5, 6}, {{0, -0.5}}},
        },
        false, 7);

    PrefixCandidate cand = candidate_for(fx.view, 0, 1, -0.25);
    EvidenceSpan span = skip_decode(cand, fx.doc, fx.map, fx.view, oracle, {}, DecodeConfig{});
    CHECK(span.end_sentence == 0);
    CHECK(span.text == "alpha beta.");
}

TEST_CASE("the probe horizon excludes sentences it cannot fit") {
    SkipFixture fx("alpha beta. gamma delta. epsilon zeta.");
    ScriptedOracle oracle = scripted(
        {
            {{1, 2}, {{0, -2.0}}},
            {{1, 2, 3, 4}, {{0, -0.5}}},
        },
        false, 7);

    DecodeConfig cfg;
    cfg.d = 3;  // remainder of sentence 0 plus sentence 1 only
    PrefixCandidate cand = candidate_for(fx.view, 0, 1, -0.25);
    EvidenceSpan span = skip_decode(cand, fx.doc, fx.map, fx.view, oracle, {}, cfg);
    CHECK(span.end_sentence == 1);
    CHECK(!span.truncated);
}

TEST_CASE("a start sentence overrunning the horizon is kept whole and flagged") {
    SkipFixture fx("alpha beta gamma. delta.");
    ScriptedOracle oracle = scripted(
        {
            {{1, 2, 3}, {{0, -1.0}}},
        },
        false, 7);

    DecodeConfig cfg;
    cfg.d = 1;
    PrefixCandidate cand = candidate_for(fx.view, 0, 1, -0.25);
    EvidenceSpan span = skip_decode(cand, fx.doc, fx.map, fx.view, oracle, {}, cfg);
    CHECK(span.start_sentence == 0);
    CHECK(span.end_sentence == 0);
    CHECK(span.text == "alpha beta gamma.");
    CHECK(span.truncated);
    CHECK(span.eos_logprob == -1.0);
}

TEST_CASE("a candidate outside the sentence map is rejected") {
    SkipFixture fx("alpha beta.");
    ScriptedOracle oracle = scripted({}, true, 7);
    PrefixCandidate cand = candidate_for(fx.view, 0, 1, -0.25);
    cand.resolved_sentence = 5;
    CHECK_THROWS_AS(skip_decode(cand, fx.doc, fx.map, fx.view, oracle, {}, DecodeConfig{}),
                    InvalidRequest);
}

namespace {

EvidenceSpan span_over(const SentenceMap& map, const SourceDocument& doc, int start, int end,
                       double score, double eos) {
    EvidenceSpan s;
    s.doc_id = doc.doc_id();
    s.start_sentence = start;
    s.end_sentence = end;
    s.char_start = map.at(start).char_start;
    s.char_end = map.at(end).char_end;
    s.text = std::string(doc.slice(s.char_start, s.char_end));
    s.prefix_score = score;
    s.eos_logprob = eos;
    return s;
}

}  // namespace

TEST_CASE("overlapping and adjacent spans merge into sentence unions") {
    SkipFixture fx("alpha beta. gamma delta. epsilon zeta. eta theta.");

    SUBCASE("overlap keeps the best score and widest cover") {
        std::vector<EvidenceSpan> spans{
            span_over(fx.map, fx.doc, 0, 2, -0.5, -1.0),
            span_over(fx.map, fx.doc, 1, 3, -0.2, -0.8),
        };
        auto merged = rank_and_merge(std::move(spans), 3, fx.doc, fx.map);
        REQUIRE(merged.size() == 1);
        CHECK(merged[0].start_sentence == 0);
        CHECK(merged[0].end_sentence == 3);
        CHECK(merged[0].prefix_score == -0.2);
        CHECK(merged[0].eos_logprob == -0.8);
        CHECK(merged[0].text == fx.doc.text());
    }

    SUBCASE("touching neighbors count as connected") {
        std::vector<EvidenceSpan> spans{
            span_over(fx.map, fx.doc, 0, 0, -0.5, -1.0),
            span_over(fx.map, fx.doc, 1, 1, -0.4, -0.9),
        };
        auto merged = rank_and_merge(std::move(spans), 3, fx.doc, fx.map);
        REQUIRE(merged.size() == 1);
        CHECK(merged[0].start_sentence == 0);
        CHECK(merged[0].end_sentence == 1);
        CHECK(merged[0].text == "alpha beta. gamma delta.");
    }

    SUBCASE("spans with a gap stay apart and rank by score") {
        std::vector<EvidenceSpan> spans{
            span_over(fx.map, fx.doc, 0, 0, -0.9, -1.0),
            span_over(fx.map, fx.doc, 2, 3, -0.1, -0.3),
        };
        auto merged = rank_and_merge(std::move(spans), 3, fx.doc, fx.map);
        REQUIRE(merged.size() == 2);
        CHECK(merged[0].start_sentence == 2);  // better score first
        CHECK(merged[1].start_sentence == 0);
    }

    SUBCASE("the keep limit applies after merging") {
        std::vector<EvidenceSpan> spans{
            span_over(fx.map, fx.doc, 0, 0, -0.9, -1.0),
            span_over(fx.map, fx.doc, 2, 2, -0.1, -0.3),
        };
        auto merged = rank_and_merge(std::move(spans), 1, fx.doc, fx.map);
        REQUIRE(merged.size() == 1);
        CHECK(merged[0].start_sentence == 2);
    }

    SUBCASE("merge agrees with plain interval union") {
        std::vector<EvidenceSpan> spans{
            span_over(fx.map, fx.doc, 3, 3, -0.5, -1.0),
            span_over(fx.map, fx.doc, 0, 1, -0.3, -0.9),
            span_over(fx.map, fx.doc, 1, 2, -0.8, -0.7),
        };
        auto merged = rank_and_merge(std::move(spans), 4, fx.doc, fx.map);
        auto expected = testsupport::merge_sentence_intervals({{3, 3}, {0, 1}, {1, 2}});
        REQUIRE(merged.size() == expected.size());
        std::set<std::pair<int, int>> got;
        for (const auto& s : merged) got.insert({s.start_sentence, s.end_sentence});
        for (const auto& e : expected) CHECK(got.count(e) == 1);
    }
}

TEST_CASE("extraction pulls the planted evidence run verbatim") {
    std::mt19937_64 rng(302);
    testsupport::PlantedDoc planted =
        testsupport::make_planted_doc(rng, testsupport::PlantedOptions{}, "planted-1");
    RelevanceOracle oracle(planted.query, planted.doc);

    ExtractionResult res = extract_evidence(planted.query, planted.doc, oracle, DecodeConfig{});
    REQUIRE(!res.spans.empty());
    CHECK(res.spans[0].start_sentence == planted.evidence_start_sentence);
    CHECK(res.spans[0].end_sentence == planted.evidence_end_sentence);
    CHECK(res.spans[0].text == planted.evidence);
    CHECK(res.doc_id == "planted-1");
    CHECK(res.diagnostics.sentences_considered ==
          static_cast<int>(oracle.sentence_map().size()));

    // Unique sentence starts resolve in one step each: a single expansion
    // scores every opener, then each kept candidate needs one probe.
    CHECK(res.diagnostics.candidates_expanded == 1);
    CHECK(res.diagnostics.oracle_calls == 1 + static_cast<std::uint64_t>(DecodeConfig{}.k));
    for (int beta : res.diagnostics.beta_per_candidate) CHECK(beta == 1);
}

TEST_CASE("extraction failures name the stage that failed") {
    // An index-only space cannot encode text, so tokenization dies first.
    auto oracle = std::make_shared<ScriptedOracle>(8, 0,
                                                   std::map<std::vector<int>,
                                                            ScriptedOracle::Distribution>{},
                                                   true);
    SourceDocument doc("d", "Some words here.");
    try {
        extract_evidence("What?", doc, *oracle, DecodeConfig{});
        FAIL("expected a staged error");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::Data);
        CHECK(std::string(err.what()).rfind("tokenize: ", 0) == 0);
    }
}

TEST_CASE("unconstrained prefix search reports matched and dropped beams") {
    std::mt19937_64 rng(77);
    testsupport::PlantedDoc planted =
        testsupport::make_planted_doc(rng, testsupport::PlantedOptions{}, "ablate");
    RelevanceOracle oracle(planted.query, planted.doc);

    DecodeConfig cfg;
    cfg.k = 3;
    AblationResult res = ablation_unconstrained_prefix(oracle.tokenized_view(), oracle,
                                                       oracle.prompt_ids(), cfg);
    CHECK(res.candidates.size() + static_cast<std::size_t>(res.unmatched_dropped) > 0);

    std::set<int> seen;
    double prev = 1.0;
    for (const auto& cand : res.candidates) {
        CHECK(cand.resolved_sentence >= 0);
        CHECK(static_cast<std::size_t>(cand.resolved_sentence) <
              oracle.tokenized_view().size());
        CHECK(seen.insert(cand.resolved_sentence).second);
        CHECK(cand.score <= prev);
        prev = cand.score;
        // The matched prefix really is that sentence's opening.
        const auto& ids = oracle.tokenized_view().at(cand.resolved_sentence).token_ids;
        std::size_t overlap = std::min(cand.token_ids.size(), ids.size());
        for (std::size_t i = 0; i < overlap; ++i) CHECK(cand.token_ids[i] == ids[i]);
    }
}

TEST_CASE("simulated token-by-token cost counts every span token plus its stop check") {
    SkipFixture fx("alpha beta. gamma delta. epsilon zeta.");
    ExtractionResult res;
    res.doc_id = "d";
    res.spans = {span_over(fx.map, fx.doc, 0, 1, -0.5, -1.0),
                 span_over(fx.map, fx.doc, 2, 2, -0.7, -0.9)};
    // Sentences hold 2 tokens each: (4 + 1) + (2 + 1).
    CHECK(simulated_token_by_token_calls(res, fx.view) == 8);
}
